#include "nti/teleop/protocol.hpp"

#include <cmath>

#include <boost/beast/core/detail/base64.hpp>

namespace nti::teleop {

namespace base64 = boost::beast::detail::base64;

std::string_view to_string(RecordCommand cmd) {
  switch (cmd) {
    case RecordCommand::kStart:
      return "start";
    case RecordCommand::kStop:
      return "stop";
    case RecordCommand::kSave:
      return "save";
    case RecordCommand::kDiscard:
      return "discard";
  }
  return "start";
}

RecordCommand record_command_from_string(std::string_view text) {
  if (text == "start") return RecordCommand::kStart;
  if (text == "stop") return RecordCommand::kStop;
  if (text == "save") return RecordCommand::kSave;
  if (text == "discard") return RecordCommand::kDiscard;
  throw ProtocolError("unknown record command: " + std::string(text));
}

std::uint64_t sequence_of(const ClientMessage& message) {
  return std::visit([](const auto& m) { return m.seq; }, message);
}

namespace {

double finite_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw ProtocolError(std::string("missing number: ") + key);
  const double v = j[key].get<double>();
  if (!std::isfinite(v)) throw ProtocolError(std::string("non-finite value: ") + key);
  return v;
}

std::uint64_t unsigned_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_unsigned()) {
    throw ProtocolError(std::string("missing unsigned integer: ") + key);
  }
  return j[key].get<std::uint64_t>();
}

}  // namespace

ClientMessage parse_client_message(std::string_view text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("message is not a JSON object");
  if (!j.contains("v") || j["v"] != kProtocolVersion) {
    throw ProtocolError("unsupported protocol version");
  }
  if (!j.contains("type") || !j["type"].is_string()) throw ProtocolError("missing type");
  const std::string type = j["type"];
  const std::uint64_t seq = unsigned_field(j, "seq");
  if (type == "control") {
    return Control{seq, {finite_number(j, "dx"), finite_number(j, "dz"), finite_number(j, "dtheta")}};
  }
  if (type == "record") {
    if (!j.contains("cmd") || !j["cmd"].is_string()) throw ProtocolError("missing cmd");
    return Record{seq, record_command_from_string(j["cmd"].get<std::string>())};
  }
  if (type == "reset") {
    Reset r{seq, std::nullopt};
    if (j.contains("seed") && !j["seed"].is_null()) r.seed = unsigned_field(j, "seed");
    return r;
  }
  throw ProtocolError("unknown message type: " + type);
}

std::string serialize(const ClientMessage& message) {
  nlohmann::json j{{"v", kProtocolVersion}, {"seq", sequence_of(message)}};
  std::visit(
      [&j](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Control>) {
          j["type"] = "control";
          j["dx"] = m.increment.dx;
          j["dz"] = m.increment.dz;
          j["dtheta"] = m.increment.dtheta;
        } else if constexpr (std::is_same_v<T, Record>) {
          j["type"] = "record";
          j["cmd"] = to_string(m.command);
        } else {
          j["type"] = "reset";
          if (m.seed) j["seed"] = *m.seed;
        }
      },
      message);
  return j.dump();
}

std::string encode_frame(const Image& image) {
  const std::string png = encode_png(image);
  std::string out(base64::encoded_size(png.size()), '\0');
  out.resize(base64::encode(out.data(), png.data(), png.size()));
  return out;
}

Image decode_frame(std::string_view text) {
  std::string png(base64::decoded_size(text.size()), '\0');
  const auto [written, read] = base64::decode(png.data(), text.data(), text.size());
  if (read != text.size()) throw ProtocolError("invalid base64 frame");
  png.resize(written);
  return decode_png(png);
}

nlohmann::json verdict_json(const data::Verdict& verdict) {
  return {{"mode", data::to_string(verdict.mode)},
          {"accept", verdict.accept},
          {"reasons", verdict.reasons}};
}

data::Verdict verdict_from_json(const nlohmann::json& j) {
  data::Verdict v;
  v.mode = data::filter_mode_from_string(j.at("mode").get<std::string>());
  v.accept = j.at("accept").get<bool>();
  v.reasons = j.at("reasons").get<std::vector<std::string>>();
  return v;
}

}  // namespace nti::teleop
