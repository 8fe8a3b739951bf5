#include <stdexcept>

#include "nti/numkit/checkpoint.hpp"
#include "nti/policy/policy.hpp"

namespace nti::policy {

void save_policy(const std::filesystem::path& path, const Model& model,
                 const data::DatasetStats& stats, const nlohmann::json& extra) {
  numkit::Checkpoint ckpt;
  nlohmann::json meta{{"format", "nti-policy"},
                      {"variant", to_string(model.variant())},
                      {"hyperparameters", model.hp().to_json()},
                      {"stats", stats.to_json()},
                      {"extra", extra.is_null() ? nlohmann::json::object() : extra}};
  ckpt.metadata = meta.dump(2);
  for (const numkit::Parameter* p : model.parameters()) ckpt.blocks.push_back({p->name, p->value});
  numkit::save_checkpoint(path, ckpt);
}

PolicyBundle load_policy(const std::filesystem::path& path) {
  const numkit::Checkpoint ckpt = numkit::load_checkpoint(path);
  const nlohmann::json meta = nlohmann::json::parse(ckpt.metadata);
  if (meta.value("format", "") != "nti-policy") {
    throw std::runtime_error(path.string() + ": not a policy checkpoint");
  }
  PolicyBundle bundle{Model(HyperParams::from_json(meta.at("hyperparameters")),
                            variant_from_string(meta.at("variant")), 0),
                      data::DatasetStats::from_json(meta.at("stats")), meta.value("extra", nlohmann::json::object())};
  for (numkit::Parameter* p : bundle.model.parameters()) {
    const numkit::CheckpointBlock* block = ckpt.find(p->name);
    if (block == nullptr) throw std::runtime_error(path.string() + ": missing block " + p->name);
    if (block->value.shape() != p->value.shape()) {
      throw std::runtime_error(path.string() + ": block " + p->name + " has shape " +
                               numkit::shape_string(block->value.shape()));
    }
    p->value = block->value;
  }
  return bundle;
}

}  // namespace nti::policy
