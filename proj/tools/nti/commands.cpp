#include "commands.hpp"

#include <csignal>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "nti/eval/ablation.hpp"
#include "nti/teleop/server.hpp"

namespace nti::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("invalid JSON in " + path.string());
  return j;
}

std::string slurp_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

nlohmann::json section(const RunContext& ctx, const char* key) {
  return ctx.file.contains(key) ? ctx.file.at(key) : nlohmann::json::object();
}

template <class T>
T from_section(const RunContext& ctx, const char* key) {
  try {
    return T::from_json(section(ctx, key));
  } catch (const std::exception& e) {
    throw UsageError(fmt::format("config section \"{}\": {}", key, e.what()));
  }
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<policy::Variant> parse_variants(const std::string& text) {
  std::vector<policy::Variant> out;
  for (const std::string& v : split(text)) {
    try {
      out.push_back(policy::variant_from_string(v));
    } catch (const std::exception&) {
      throw UsageError("unknown variant: " + v);
    }
  }
  if (out.empty()) throw UsageError("no variants given");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const std::string& s : split(text)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw UsageError("invalid seed: " + s);
    }
  }
  if (out.empty()) throw UsageError("no seeds given");
  return out;
}

std::string verdict_text(const data::Verdict& v) {
  if (v.accept) return "accept";
  std::string out = "reject(";
  for (std::size_t i = 0; i < v.reasons.size(); ++i) out += (i ? "," : "") + v.reasons[i];
  return out + ")";
}

nlohmann::json episode_summary(const fs::path& dir, const data::Episode& e) {
  const data::EpisodeMetrics m = data::compute_metrics(e);
  return {{"dir", dir.filename().string()},
          {"seed", e.meta.seed},
          {"outcome", e.meta.outcome},
          {"duration", m.duration},
          {"max_peak", m.max_peak()},
          {"safety", teleop::verdict_json(*e.meta.safety)},
          {"training", teleop::verdict_json(*e.meta.training)}};
}

void print_table(const eval::MetricsTable& table) { fmt::print("{}", eval::render_text(table)); }

// ---------------------------------------------------------------------------------------------

Command demo_gen(CLI::App& root) {
  struct Opts {
    int n = 50;
    int max_steps = 400;
    bool no_frames = false;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* app = root.add_subcommand("demo-gen", "Record scripted-expert demonstrations");
  app->add_option("--n", o->n, "Number of episodes")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--max-steps", o->max_steps, "Step budget per episode")->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_flag("--no-frames", o->no_frames, "Skip camera frames");
  return {app, [o](RunContext& ctx) {
            eval::ScriptedExpertConfig expert = from_section<eval::ScriptedExpertConfig>(ctx, "expert");
            expert.seed = ctx.seed;
            const data::FilterConfig filter = from_section<data::FilterConfig>(ctx, "filter");
            expert.validate(filter);
            eval::RolloutConfig rc{o->max_steps, filter, !o->no_frames};
            ctx.resolved["expert"] = expert.to_json();
            ctx.resolved["filter"] = filter.to_json();
            ctx.resolved["n"] = o->n;
            ctx.resolved["max_steps"] = o->max_steps;
            ctx.resolved["frames"] = !o->no_frames;

            const sim::Simulator sim(ctx.sim_config);
            nlohmann::json rows = nlohmann::json::array();
            int success = 0, safe = 0, train = 0;
            for (int i = 0; i < o->n; ++i) {
              const std::uint64_t seed = ctx.seed * 1000 + static_cast<std::uint64_t>(i);
              const data::Episode e = eval::rollout_expert(sim, expert, seed, rc);
              const fs::path dir = ctx.out / "episodes" / fmt::format("episode_{:04d}", i);
              data::write_episode(dir, e);
              success += e.meta.outcome == "success";
              safe += e.meta.safety->accept;
              train += e.meta.training->accept;
              rows.push_back(episode_summary(dir, e));
              fmt::print("{}  seed {}  {}  safety {}  training {}\n", dir.filename().string(), seed,
                         e.meta.outcome, verdict_text(*e.meta.safety), verdict_text(*e.meta.training));
            }
            write_text(ctx.out / "filter_summary.json",
                       nlohmann::json{{"episodes", rows},
                                      {"success", success},
                                      {"safety_accept", safe},
                                      {"training_accept", train}}
                               .dump(2) + "\n");
            fmt::print("{} episodes: {} success, {} safety-accepted, {} training-accepted\n", o->n,
                       success, safe, train);
            return 0;
          }};
}

Command filter(CLI::App& root) {
  struct Opts {
    std::string in;
    bool linear = false;
    double keep = -1.0;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* app = root.add_subcommand("filter", "Recompute safety and training verdicts of episodes");
  app->add_option("--in", o->in, "Directory of episode directories")->required()->check(CLI::ExistingDirectory);
  app->add_option("--keep-fraction", o->keep, "Training keep fraction (default from config, 0.7)");
  app->add_flag("--linear-impulse", o->linear, "Scale the impulse limit in the linear domain");
  return {app, [o](RunContext& ctx) {
            data::FilterConfig f = from_section<data::FilterConfig>(ctx, "filter");
            if (o->keep >= 0.0) f.keep_fraction = o->keep;
            if (o->linear) f.impulse_domain = data::ImpulseDomain::kLinear;
            try {
              f.validate();
            } catch (const std::invalid_argument& e) {
              throw UsageError(e.what());
            }
            ctx.resolved["filter"] = f.to_json();
            ctx.resolved["in"] = o->in;
            nlohmann::json rows = nlohmann::json::array();
            int safe = 0, train = 0, n = 0;
            for (const fs::path& dir : data::list_episodes(o->in)) {
              data::Episode e = data::read_episode(dir, false);
              data::attach_verdicts(e, f);
              rows.push_back(episode_summary(dir, e));
              safe += e.meta.safety->accept;
              train += e.meta.training->accept;
              ++n;
              fmt::print("{}  {}  safety {}  training {}\n", dir.filename().string(), e.meta.outcome,
                         verdict_text(*e.meta.safety), verdict_text(*e.meta.training));
            }
            write_text(ctx.out / "filter_summary.json",
                       nlohmann::json{{"episodes", rows}, {"safety_accept", safe}, {"training_accept", train}}
                               .dump(2) + "\n");
            fmt::print("{} episodes: {} safety-accepted, {} training-accepted\n", n, safe, train);
            return 0;
          }};
}

struct HpFlags {
  std::string preset = "desk";
  int steps = -1;
  double lr = -1.0;
  int batch = -1;
  int chunk = -1;

  void add(CLI::App* app) {
    app->add_option("--preset", preset, "Hyperparameter preset")->check(CLI::IsMember({"desk", "full"}))
        ->capture_default_str();
    app->add_option("--steps", steps, "Training steps");
    app->add_option("--lr", lr, "Learning rate");
    app->add_option("--batch", batch, "Batch size");
    app->add_option("--chunk", chunk, "Chunk size k");
  }

  policy::HyperParams resolve(const RunContext& ctx) const {
    policy::HyperParams hp = preset == "full" ? policy::HyperParams::full() : policy::HyperParams::desk();
    if (ctx.file.contains("hyperparameters")) {
      nlohmann::json merged = hp.to_json();
      merged.merge_patch(ctx.file.at("hyperparameters"));
      hp = policy::HyperParams::from_json(merged);
    }
    if (steps >= 0) hp.training_steps = steps;
    if (lr > 0.0) hp.learning_rate = lr;
    if (batch > 0) hp.batch_size = batch;
    if (chunk > 0) hp.chunk = chunk;
    try {
      hp.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return hp;
  }
};

data::DatasetBuild load_dataset(RunContext& ctx, const std::string& dir, int chunk) {
  data::DatasetConfig dc;
  dc.chunk = chunk;
  dc.filter = from_section<data::FilterConfig>(ctx, "filter");
  const auto dirs = data::list_episodes(dir);
  if (dirs.empty()) throw std::runtime_error("no episodes under " + dir);
  data::DatasetBuild build = data::build_dataset(dirs, dc);
  fmt::print("dataset: {} episodes accepted, {} rejected, {} windows, fingerprint {:016x}\n",
             build.accepted.size(), build.rejected.size(), build.dataset.size(),
             build.dataset.fingerprint());
  ctx.resolved["data"] = dir;
  ctx.resolved["filter"] = dc.filter.to_json();
  ctx.resolved["dataset_fingerprint"] = fmt::format("{:016x}", build.dataset.fingerprint());
  return build;
}

Command train(CLI::App& root) {
  struct Opts {
    std::string data;
    std::string variant = "RACCT";
    int log_every = 10;
    HpFlags hp;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* app = root.add_subcommand("train", "Train one policy variant");
  app->add_option("--data", o->data, "Directory of episode directories")->required()
      ->check(CLI::ExistingDirectory);
  app->add_option("--variant", o->variant, "ACT, ACCT, RACT or RACCT")->capture_default_str();
  app->add_option("--log-every", o->log_every, "Curve sampling interval")->capture_default_str()
      ->check(CLI::PositiveNumber);
  o->hp.add(app);
  return {app, [o](RunContext& ctx) {
            const policy::Variant variant = parse_variants(o->variant).front();
            const policy::HyperParams hp = o->hp.resolve(ctx);
            ctx.resolved["variant"] = policy::to_string(variant);
            ctx.resolved["hyperparameters"] = hp.to_json();
            const data::DatasetBuild build = load_dataset(ctx, o->data, hp.chunk);

            policy::Model model(hp, variant, ctx.seed);
            fmt::print("{}: {} parameters, {} steps\n", policy::to_string(variant), model.parameter_count(),
                       hp.training_steps);
            policy::Trainer trainer(model, build.dataset, ctx.seed);
            const policy::TrainReport report = trainer.run(hp.training_steps, o->log_every);
            write_text(ctx.out / "train_curve.csv", policy::train_curve_csv(report));
            if (report.diverged) throw std::runtime_error("training diverged: " + report.error);
            nlohmann::json extra{{"variant", policy::to_string(variant)},
                                 {"seed", ctx.seed},
                                 {"dataset_fingerprint", ctx.resolved["dataset_fingerprint"]}};
            policy::save_policy(ctx.out / "policy.ckpt", model, build.dataset.stats(), extra);
            data::write_stats(ctx.out / "stats.json", build.dataset.stats());
            fmt::print("final loss {:.4f} in {:.0f} s -> {}\n", report.curve.back().loss, report.seconds,
                       (ctx.out / "policy.ckpt").string());
            return 0;
          }};
}

Command eval_cmd(CLI::App& root) {
  struct Opts {
    std::string policy;
    int n = 20;
    std::uint64_t seed_base = 100000;
    int max_steps = 400;
    bool frames = false;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* app = root.add_subcommand("eval", "Evaluate a trained policy in closed loop");
  app->add_option("--policy", o->policy, "Checkpoint")->required()->check(CLI::ExistingFile);
  app->add_option("--n", o->n, "Evaluation rollouts")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--seed-base", o->seed_base, "Rollout i uses reset seed seed-base + i")->capture_default_str();
  app->add_option("--max-steps", o->max_steps, "Step budget per rollout")->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_flag("--frames", o->frames, "Keep camera frames in the saved episodes");
  return {app, [o](RunContext& ctx) {
            const policy::PolicyBundle bundle = policy::load_policy(o->policy);
            const data::FilterConfig filter = from_section<data::FilterConfig>(ctx, "filter");
            ctx.resolved["policy"] = o->policy;
            ctx.resolved["variant"] = policy::to_string(bundle.model.variant());
            ctx.resolved["n"] = o->n;
            ctx.resolved["seed_base"] = o->seed_base;
            ctx.resolved["max_steps"] = o->max_steps;
            ctx.resolved["filter"] = filter.to_json();
            const sim::Simulator sim(ctx.sim_config);
            eval::RolloutConfig rc{o->max_steps, filter, o->frames};
            std::vector<data::Episode> episodes;
            for (int i = 0; i < o->n; ++i) {
              episodes.push_back(eval::rollout_policy(sim, bundle, o->seed_base + i, rc));
              const data::Episode& e = episodes.back();
              data::write_episode(ctx.out / "episodes" / fmt::format("eval_{:04d}", i), e);
              fmt::print("eval_{:04d}  {}  T {:.2f} s  peak {:.2f} N\n", i, e.meta.outcome,
                         data::compute_metrics(e).duration, data::compute_metrics(e).max_peak());
            }
            eval::MetricsTable table;
            table.rows.push_back(eval::aggregate(policy::to_string(bundle.model.variant()), episodes, filter));
            write_text(ctx.out / "table.txt", eval::render_text(table));
            write_text(ctx.out / "table.csv", eval::render_csv(table));
            print_table(table);
            return 0;
          }};
}

Command rollout(CLI::App& root) {
  struct Opts {
    std::string policy;
    int max_steps = 400;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* app = root.add_subcommand("rollout", "Run one episode with a policy or the scripted expert");
  app->add_option("--policy", o->policy, "Checkpoint; the scripted expert drives when omitted")
      ->check(CLI::ExistingFile);
  app->add_option("--max-steps", o->max_steps, "Step budget")->capture_default_str()->check(CLI::PositiveNumber);
  return {app, [o](RunContext& ctx) {
            const sim::Simulator sim(ctx.sim_config);
            const data::FilterConfig filter = from_section<data::FilterConfig>(ctx, "filter");
            eval::RolloutConfig rc{o->max_steps, filter, true};
            ctx.resolved["filter"] = filter.to_json();
            ctx.resolved["max_steps"] = o->max_steps;
            data::Episode e;
            if (o->policy.empty()) {
              eval::ScriptedExpertConfig expert = from_section<eval::ScriptedExpertConfig>(ctx, "expert");
              ctx.resolved["expert"] = expert.to_json();
              e = eval::rollout_expert(sim, expert, ctx.seed, rc);
            } else {
              ctx.resolved["policy"] = o->policy;
              e = eval::rollout_policy(sim, policy::load_policy(o->policy), ctx.seed, rc);
            }
            data::write_episode(ctx.out / "episode", e);
            const data::EpisodeMetrics m = data::compute_metrics(e, filter);
            fmt::print("{}  T {:.2f} s  peak {:.2f} N  safety {}  training {}\n", e.meta.outcome, m.duration,
                       m.max_peak(), verdict_text(*e.meta.safety), verdict_text(*e.meta.training));
            return 0;
          }};
}

Command ablate(CLI::App& root) {
  struct Opts {
    std::string data;
    std::string variants;
    std::string seeds;
    int n_eval = -1;
    int threads = -1;
    int max_steps = -1;
    HpFlags hp;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* app = root.add_subcommand("ablate", "Train and evaluate policy variants over seeds");
  app->add_option("--data", o->data, "Directory of episode directories")->required()
      ->check(CLI::ExistingDirectory);
  app->add_option("--variants", o->variants, "Comma-separated variants (default act,racct)");
  app->add_option("--seeds", o->seeds, "Comma-separated training seeds (default 1,2,3)");
  app->add_option("--n-eval", o->n_eval, "Evaluation rollouts per cell (default 20)");
  app->add_option("--threads", o->threads, "Worker threads, 0 for all cores");
  app->add_option("--max-steps", o->max_steps, "Step budget per rollout");
  o->hp.add(app);
  return {app, [o](RunContext& ctx) {
            eval::AblationConfig cfg = from_section<eval::AblationConfig>(ctx, "ablation");
            cfg.hp = o->hp.resolve(ctx);
            if (!o->variants.empty()) cfg.variants = parse_variants(o->variants);
            if (!o->seeds.empty()) cfg.seeds = parse_seeds(o->seeds);
            if (o->n_eval >= 0) cfg.n_eval = o->n_eval;
            if (o->threads >= 0) cfg.threads = o->threads;
            if (o->max_steps >= 0) cfg.rollout.max_steps = o->max_steps;
            cfg.rollout.limits = from_section<data::FilterConfig>(ctx, "filter");
            cfg.out_dir = ctx.out;
            try {
              cfg.validate();
            } catch (const std::invalid_argument& e) {
              throw UsageError(e.what());
            }
            ctx.resolved["ablation"] = cfg.to_json();
            const data::DatasetBuild build = load_dataset(ctx, o->data, cfg.hp.chunk);
            const sim::Simulator sim(ctx.sim_config);
            const eval::AblationResult r =
                eval::run_ablation(build.dataset, sim, cfg, [](const eval::CellResult& c) {
                  const auto p = c.max_channel_peak();
                  fmt::print("{} seed {}: success {:.0f}%, max-channel peak {}, {:.0f} s\n",
                             policy::to_string(c.variant), c.seed, 100.0 * c.metrics.success_rate,
                             p ? fmt::format("{:.2f} N", *p) : "-", c.seconds);
                  std::fflush(stdout);
                });
            eval::write_ablation_report(ctx.out, r, cfg);
            fmt::print("{}", slurp_text(ctx.out / "table.txt"));
            for (policy::Variant v : cfg.variants) {
              const auto s = r.median_success(v);
              const auto p = r.median_max_peak(v);
              fmt::print("{}: median success {}, median max-channel peak {}\n", policy::to_string(v),
                         s ? fmt::format("{:.0f}%", 100.0 * *s) : "-", p ? fmt::format("{:.2f} N", *p) : "-");
            }
            fmt::print("total {:.0f} s\n", r.seconds);
            return 0;
          }};
}

Command segment(CLI::App& root) {
  struct Opts {
    std::string in;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* app = root.add_subcommand("segment", "Track the tube in one camera frame");
  app->add_option("--in", o->in, "8-bit PNG frame")->required()->check(CLI::ExistingFile);
  return {app, [o](RunContext& ctx) {
            const Image frame = read_png(o->in);
            const vision::PipelineResult r = vision::run_pipeline(frame);
            ctx.resolved["in"] = o->in;
            nlohmann::json j{{"frame", fs::path(o->in).filename().string()},
                             {"width", frame.width},
                             {"height", frame.height},
                             {"component_count", r.component_count},
                             {"candidates", r.candidates.size()},
                             {"s_kappa", r.score()}};
            if (r.tube) {
              nlohmann::json pts = nlohmann::json::array();
              for (const vision::Pixel& p : r.tube->points) pts.push_back({p.x, p.y});
              j["skeleton"] = {{"points", pts},
                               {"endpoints", r.tube->endpoints},
                               {"junctions", r.tube->junctions},
                               {"mean_width", r.tube->mean_width},
                               {"length", r.tube->length}};
            }
            if (r.fit) {
              j["fit"] = {{"a", r.fit->a},   {"b", r.fit->b},
                          {"c", r.fit->c},   {"rms", r.fit->rms},
                          {"mean_curvature", r.fit->mean_curvature}, {"score", r.fit->score}};
            }
            const std::string stem = fs::path(o->in).stem().string();
            write_text(ctx.out / (stem + ".skeleton.json"), j.dump(2) + "\n");
            Image mask(r.tube_mask.width, r.tube_mask.height);
            for (std::size_t i = 0; i < mask.pixels.size(); ++i) mask.pixels[i] = r.tube_mask.data[i] ? 255 : 0;
            if (!mask.pixels.empty()) write_png(ctx.out / (stem + ".mask.png"), mask);
            fmt::print("s_kappa {:.6f}{}\n", r.score(), r.tube ? "" : " (no tube detected)");
            return 0;
          }};
}

Command teleop_serve(CLI::App& root) {
  struct Opts {
    std::string bind = "127.0.0.1:8765";
    int tick_ms = 50;
    bool no_side_view = false;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* app = root.add_subcommand("teleop-serve", "Serve simulator sessions to the teleoperation console");
  app->add_option("--bind", o->bind, "Listen address host:port")->capture_default_str();
  app->add_option("--tick-ms", o->tick_ms, "StateFrame period")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_flag("--no-side-view", o->no_side_view, "Do not stream the side-view render");
  return {app, [o](RunContext& ctx) {
            teleop::ServerOptions so;
            const auto colon = o->bind.rfind(':');
            if (colon == std::string::npos) throw UsageError("--bind expects host:port");
            so.address = o->bind.substr(0, colon);
            try {
              const int port = std::stoi(o->bind.substr(colon + 1));
              if (port < 0 || port > 65535) throw std::out_of_range("port");
              so.port = static_cast<unsigned short>(port);
            } catch (const std::exception&) {
              throw UsageError("invalid port in --bind: " + o->bind);
            }
            so.tick = std::chrono::milliseconds(o->tick_ms);
            so.base_seed = ctx.seed;
            so.session.out_dir = ctx.out / "episodes";
            so.session.side_view = !o->no_side_view;
            so.session.filter = from_section<data::FilterConfig>(ctx, "filter");
            ctx.resolved["bind"] = o->bind;
            ctx.resolved["tick_ms"] = o->tick_ms;
            ctx.resolved["session"] = so.session.to_json();

            // Block the stop signals before any thread starts; a waiter thread turns them into stop().
            sigset_t signals;
            sigemptyset(&signals);
            sigaddset(&signals, SIGINT);
            sigaddset(&signals, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &signals, nullptr);

            const sim::Simulator sim(ctx.sim_config);
            teleop::Server server(sim, so);
            fmt::print("teleop bridge listening on ws://{}:{}/ (protocol v{}), episodes -> {}\n", so.address,
                       server.port(), teleop::kProtocolVersion, so.session.out_dir.string());
            std::fflush(stdout);
            std::jthread waiter([&server, signals] {
              int sig = 0;
              sigwait(&signals, &sig);
              server.stop();
            });
            server.run();
            fmt::print("stopped after {} sessions\n", server.sessions_opened());
            pthread_kill(waiter.native_handle(), SIGTERM);
            return 0;
          }};
}

Command replay_cmd(CLI::App& root) {
  struct Opts {
    std::string in;
    bool write = false;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* app = root.add_subcommand("replay", "Re-run a recorded episode's actions and compare");
  app->add_option("--in", o->in, "Episode directory")->required()->check(CLI::ExistingDirectory);
  app->add_flag("--write", o->write, "Save the replayed episode under --out");
  return {app, [o](RunContext& ctx) {
            const data::Episode recorded = data::read_episode(o->in);
            const data::FilterConfig filter = from_section<data::FilterConfig>(ctx, "filter");
            ctx.resolved["in"] = o->in;
            ctx.resolved["filter"] = filter.to_json();
            const sim::Simulator sim(ctx.sim_config);
            const data::Episode replayed = eval::replay(sim, recorded, filter);
            if (o->write) data::write_episode(ctx.out / "replayed", replayed);

            std::vector<std::string> diffs;
            if (data::signals_csv(replayed) != data::signals_csv(recorded)) diffs.push_back("signals.csv");
            if (data::meta_json(replayed) != data::meta_json(recorded)) diffs.push_back("meta.json");
            if (replayed.frames != recorded.frames) diffs.push_back("frames");
            if (diffs.empty()) {
              fmt::print("identical: {} steps, outcome {}\n", recorded.action_count(), recorded.meta.outcome);
              return 0;
            }
            fmt::print("mismatch in {}\n", fmt::join(diffs, ", "));
            return 1;
          }};
}

}  // namespace

RunContext make_context(const GlobalOptions& g) {
  RunContext ctx;
  ctx.seed = g.seed;
  ctx.out = g.out;
  if (!g.config.empty()) {
    ctx.file = read_json(g.config);
    if (!ctx.file.is_object()) throw UsageError("--config must hold a JSON object");
  }
  std::string sim_path = g.sim;
  if (sim_path.empty() && ctx.file.contains("sim")) sim_path = ctx.file.at("sim").get<std::string>();
  ctx.sim_config = sim_path.empty() ? sim::SimConfig::defaults() : sim::SimConfig::load(sim_path);
  ctx.resolved["sim"] = ctx.sim_config.to_json();
  if (!g.config.empty()) ctx.resolved["config_file"] = g.config;
  fs::create_directories(ctx.out);
  return ctx;
}

std::vector<Command> add_commands(CLI::App& app) {
  return {demo_gen(app), filter(app),  train(app),        eval_cmd(app),  rollout(app),
          ablate(app),   segment(app), teleop_serve(app), replay_cmd(app)};
}

}  // namespace nti::cli
