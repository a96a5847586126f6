// Command-line front end: train a model, generate the deployable test kit,
// run fault-injection campaigns, replay ROC curves, and run one live health
// check. Exit codes: 0 = success/healthy, 1 = faulty verdict (check only),
// >= 2 = operational error.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "spintest/spintest.hpp"

namespace fs = std::filesystem;
using spintest::json;

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;  // 0 = keep config value
};

json load_config(const CommonOpts& opts) {
  if (opts.config_path.empty()) return json::object();
  return spintest::parse_json_file(opts.config_path);
}

// The manifest is the one output that carries wall-clock time; every other
// report is byte-reproducible from (config, seed).
void write_manifest(const CommonOpts& opts, const std::string& command, const json& config,
                    std::uint64_t seed, const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["config_path"] = opts.config_path;
  m["config_hash"] = "fnv1a:" + hex64(fnv1a64(config.dump()));
  m["seed"] = seed;
  m["version"] = spintest::kVersionString;
  m["outputs"] = outputs;
  m["wall_clock_utc"] = utc_now();
  spintest::write_text_file((fs::path(opts.out_dir) / "run_manifest.json").string(),
                            m.dump(2) + "\n");
}

std::string out_path(const CommonOpts& opts, const std::string& name) {
  return (fs::path(opts.out_dir) / name).string();
}

spintest::Dataset dataset_from_config(const json& d) {
  const std::string kind = d.value("kind", std::string("synth"));
  if (kind == "synth") {
    return spintest::synth_dataset(d.value("n_per_class", 500), d.value("n_classes", 4),
                                   d.value("dim", 32), d.value("seed", std::uint64_t{7}));
  }
  if (kind == "idx") {
    return spintest::load_idx(d.at("images").get<std::string>(),
                              d.at("labels").get<std::string>(),
                              d.value("binarize_threshold", 0.5));
  }
  throw spintest::spec_error("dataset.kind must be 'synth' or 'idx'");
}

int cmd_train(const CommonOpts& opts) {
  const json cfg = load_config(opts);

  const json dcfg = cfg.value("dataset", json::object());
  spintest::Dataset data = dataset_from_config(dcfg);

  spintest::MethodConfig mcfg;
  mcfg.method = spintest::method_from_name(cfg.value("method", std::string("spin_drop")));
  mcfg.dropout_p = cfg.value("dropout_p", 0.25);
  mcfg.group_size = cfg.value("group_size", 4);
  mcfg.scale_gamma = cfg.value("scale_gamma", 0.5);
  mcfg.sharing = spintest::sharing_from_name(cfg.value("sharing", std::string("per_column")));

  spintest::TrainConfig tcfg;
  tcfg.epochs = cfg.value("epochs", 40);
  tcfg.batch_size = cfg.value("batch_size", 32);
  tcfg.learning_rate = cfg.value("learning_rate", 0.05);
  tcfg.momentum = cfg.value("momentum", 0.9);
  tcfg.seed = opts.seed_set ? opts.seed : cfg.value("seed", std::uint64_t{1});

  std::vector<int> layer_dims =
      cfg.value("layer_dims", std::vector<int>{data.dim, 64, 64, data.n_classes});

  spintest::TrainReport report;
  const spintest::BinaryNetwork net =
      spintest::train(layer_dims, mcfg, data, tcfg, &report);

  fs::create_directories(opts.out_dir);
  const std::string model_path = out_path(opts, "model.json");
  const std::string dataset_path = out_path(opts, "dataset.json");
  const std::string metrics_path = out_path(opts, "train_metrics.json");
  spintest::write_text_file(model_path, spintest::model_to_json(net).dump(2) + "\n");
  spintest::write_text_file(dataset_path, spintest::dataset_to_json(data).dump() + "\n");
  json metrics;
  metrics["final_loss"] = report.final_loss;
  metrics["epoch_losses"] = report.epoch_losses;
  metrics["bayes_eval_accuracy_t20"] = report.bayes_eval_accuracy;
  metrics["train_seed"] = tcfg.seed;
  metrics["layer_dims"] = layer_dims;
  spintest::write_text_file(metrics_path, metrics.dump(2) + "\n");
  write_manifest(opts, "train", cfg, tcfg.seed, {model_path, dataset_path, metrics_path});

  std::cout << "trained " << layer_dims.size() - 1 << "-layer model; Bayesian (T=20) eval accuracy "
            << report.bayes_eval_accuracy << "\n";
  return 0;
}

int cmd_gen_tests(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  const std::string model_path = cfg.value("model", out_path(opts, "model.json"));
  const std::string dataset_path = cfg.value("dataset", out_path(opts, "dataset.json"));
  const spintest::BinaryNetwork net =
      spintest::model_from_json(spintest::parse_json_file(model_path));
  const spintest::Dataset data =
      spintest::dataset_from_json(spintest::parse_json_file(dataset_path));

  const int n_vectors = cfg.value("n_vectors", 100);
  const int repetitions = cfg.value("repetitions", 200);
  const int passes = cfg.value("passes", 20);
  const int r_fit = cfg.value("r_fit", 20);
  const auto pool = cfg.value("candidate_pool", std::size_t{0});
  const std::uint64_t seed = opts.seed_set ? opts.seed : cfg.value("seed", std::uint64_t{11});

  const spintest::DropoutBank bank(net);
  spintest::RngStream root(seed);
  const spintest::TestVectorSet tvs = spintest::generate_test_vectors(
      net, bank, data.train_inputs, repetitions, passes, n_vectors, root.derive(0), seed,
      pool);
  const spintest::UncertaintyProfile profile =
      spintest::fit_profile(net, bank, tvs, r_fit, passes, root.derive(1));

  fs::create_directories(opts.out_dir);
  const std::string tvs_path = out_path(opts, "test_vectors.json");
  const std::string profile_path = out_path(opts, "profile.json");
  spintest::write_text_file(tvs_path, spintest::test_vectors_to_json(tvs).dump() + "\n");
  spintest::write_text_file(profile_path,
                            spintest::profile_to_json(profile).dump(2) + "\n");
  write_manifest(opts, "gen-tests", cfg, seed, {tvs_path, profile_path});

  const auto kit_bytes = fs::file_size(tvs_path) + fs::file_size(profile_path);
  std::cout << "kit: " << tvs.size() << " vectors (" << kit_bytes << " bytes), "
            << "vector/train ratio "
            << static_cast<double>(tvs.size()) / static_cast<double>(data.train_inputs.size())
            << ", band [" << profile.b_lower << ", " << profile.b_upper << "]\n";
  return 0;
}

std::vector<spintest::SweepSpec> default_sweeps() {
  using spintest::FaultKind;
  using spintest::FaultLocation;
  using spintest::FaultSpec;
  const std::vector<double> rates{0.0, 0.05, 0.10, 0.20, 0.30};
  const std::vector<double> small_rates{0.05, 0.10, 0.20};
  const std::vector<double> sigmas{0.05, 0.10, 0.20};
  return {
      {"weight-stuck-0", FaultSpec{FaultLocation::WeightCells, FaultKind::StuckAt0, 0, 0, 0}, rates},
      {"weight-stuck-1", FaultSpec{FaultLocation::WeightCells, FaultKind::StuckAt1, 0, 0, 0}, rates},
      {"weight-flip", FaultSpec{FaultLocation::WeightCells, FaultKind::BitFlip, 0, 0, 0}, rates},
      {"buffer-flip", FaultSpec{FaultLocation::BufferMemory, FaultKind::BitFlip, 0, 0, 0}, rates},
      {"dropout-stuck-drop", FaultSpec{FaultLocation::DropoutModule, FaultKind::StuckAt1, 0, 0, 0}, small_rates},
      {"dropout-prob-var", FaultSpec{FaultLocation::DropoutModule, FaultKind::DropProbVariation, 0, 0, 0}, sigmas},
      {"mac-mult", FaultSpec{FaultLocation::MacConductance, FaultKind::MultiplicativeGaussian, 0, 0, 0}, sigmas},
      {"mac-add", FaultSpec{FaultLocation::MacConductance, FaultKind::AdditiveGaussian, 0, 0, 0}, sigmas},
  };
}

std::vector<int> l_grid(std::size_t n_queries) {
  std::vector<int> ls;
  for (int l = 1; l <= static_cast<int>(std::min<std::size_t>(10, n_queries)); ++l)
    ls.push_back(l);
  return ls;
}

int cmd_campaign(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  const std::string model_path = cfg.value("model", out_path(opts, "model.json"));
  const std::string dataset_path = cfg.value("dataset", out_path(opts, "dataset.json"));
  const std::string tvs_path = cfg.value("test_vectors", out_path(opts, "test_vectors.json"));
  const std::string profile_path = cfg.value("profile", out_path(opts, "profile.json"));

  const spintest::BinaryNetwork net =
      spintest::model_from_json(spintest::parse_json_file(model_path));
  const spintest::Dataset data =
      spintest::dataset_from_json(spintest::parse_json_file(dataset_path));
  const spintest::TestVectorSet tvs =
      spintest::test_vectors_from_json(spintest::parse_json_file(tvs_path));
  const spintest::UncertaintyProfile profile =
      spintest::profile_from_json(spintest::parse_json_file(profile_path));

  spintest::CampaignConfig ccfg = spintest::campaign_config_from_json(cfg);
  if (ccfg.sweeps.empty()) ccfg.sweeps = default_sweeps();
  if (opts.seed_set) ccfg.seed = opts.seed;
  if (opts.threads > 0) ccfg.threads = opts.threads;

  const spintest::CampaignResult result =
      spintest::run_campaign(net, data, tvs, profile, ccfg);

  fs::create_directories(opts.out_dir);
  const std::string result_path = out_path(opts, "campaign_result.json");
  const std::string acc_path = out_path(opts, "accuracy_sweep.csv");
  const std::string cov_path = out_path(opts, "coverage.csv");
  const std::string fpr_path = out_path(opts, "fpr_vs_l.csv");
  const std::string roc_path = out_path(opts, "roc.csv");
  const std::string summary_path = out_path(opts, "summary.json");

  spintest::write_text_file(result_path,
                            spintest::campaign_result_to_json(result).dump() + "\n");
  spintest::write_text_file(acc_path, spintest::accuracy_sweep_csv(result));
  spintest::write_text_file(cov_path, spintest::coverage_csv(result));
  const auto ls = l_grid(tvs.size());
  spintest::write_text_file(fpr_path, spintest::fpr_vs_l_csv(result, ls));
  spintest::write_text_file(roc_path, spintest::roc_csv(spintest::roc_sweep(result, ls)));

  json summary;
  summary["clean_accuracy"] = result.clean_accuracy;
  summary["control_fpr"] = result.control_fpr;
  summary["points"] = json::array();
  for (const auto& p : result.points) {
    json jp;
    jp["sweep"] = p.sweep_name;
    jp["value"] = p.value;
    jp["mean_faulty_accuracy"] = p.mean_faulty_accuracy;
    jp["critical"] = p.critical_count;
    jp["coverage_critical"] = p.coverage_critical;
    summary["points"].push_back(std::move(jp));
  }
  spintest::write_text_file(summary_path, summary.dump(2) + "\n");
  write_manifest(opts, "campaign", cfg, ccfg.seed,
                 {result_path, acc_path, cov_path, fpr_path, roc_path, summary_path});

  for (const auto& p : result.points)
    std::cout << "[" << p.sweep_name << " @ " << p.value << "] acc "
              << p.clean_accuracy << " -> " << p.mean_faulty_accuracy << ", benign "
              << p.benign_count << ", critical " << p.critical_count
              << ", coverage_critical " << p.coverage_critical << ", fpr " << p.fpr
              << "\n";
  return 0;
}

int cmd_roc(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  const std::string result_path =
      cfg.value("result", out_path(opts, "campaign_result.json"));
  const spintest::CampaignResult result =
      spintest::campaign_result_from_json(spintest::parse_json_file(result_path));
  std::size_t n_queries = 0;
  for (const auto& v : result.control_verdicts)
    n_queries = std::max(n_queries, v.record.size());
  for (const auto& p : result.points)
    for (const auto& rec : p.records) n_queries = std::max(n_queries, rec.record.size());
  const std::vector<int> ls = cfg.contains("l_values")
                                  ? cfg.at("l_values").get<std::vector<int>>()
                                  : l_grid(n_queries);
  const auto roc = spintest::roc_sweep(result, ls);
  fs::create_directories(opts.out_dir);
  const std::string roc_path = out_path(opts, "roc.csv");
  spintest::write_text_file(roc_path, spintest::roc_csv(roc));
  write_manifest(opts, "roc", cfg, result.config.seed, {roc_path});
  for (const auto& p : roc)
    std::cout << "L=" << p.vote_length << " tpr_critical=" << p.tpr_critical
              << " tpr_benign=" << p.tpr_benign << " fpr=" << p.fpr << "\n";
  return 0;
}

int cmd_check(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  const std::string model_path = cfg.value("model", out_path(opts, "model.json"));
  const std::string tvs_path = cfg.value("test_vectors", out_path(opts, "test_vectors.json"));
  const std::string profile_path = cfg.value("profile", out_path(opts, "profile.json"));

  const spintest::BinaryNetwork net =
      spintest::model_from_json(spintest::parse_json_file(model_path));
  const spintest::TestVectorSet tvs =
      spintest::test_vectors_from_json(spintest::parse_json_file(tvs_path));
  const spintest::UncertaintyProfile profile =
      spintest::profile_from_json(spintest::parse_json_file(profile_path));

  const int vote_length = cfg.value("vote_length", 4);
  const int t_detect = cfg.value("t_detect", tvs.passes);
  const std::uint64_t seed = opts.seed_set ? opts.seed : cfg.value("seed", std::uint64_t{101});

  spintest::DropoutBank bank(net);
  spintest::FaultContext ctx;
  spintest::RngStream root(seed);
  if (cfg.contains("inject")) {
    const spintest::FaultSpec spec = spintest::fault_spec_from_json(cfg.at("inject"));
    ctx = spintest::inject(net, bank, spec, root.derive(0));
    if (ctx.mac_variation && ctx.mac_variation->sigma_add > 0.0)
      throw spintest::spec_error(
          "check: additive MAC variation needs calibration; use the campaign command");
  }
  const spintest::Verdict v = spintest::run_test_session(
      net, bank, ctx, tvs, profile, vote_length, t_detect, root.derive(1));

  json out;
  out["decision"] = v.faulty ? "faulty" : "healthy";
  out["positives"] = v.positives;
  out["queries_used"] = v.queries_used;
  out["forward_passes"] = v.forward_passes;
  spintest::RealVec us;
  for (const auto& q : v.record) us.push_back(q.uncertainty);
  out["uncertainties"] = us;
  std::cout << out.dump(2) << "\n";

  fs::create_directories(opts.out_dir);
  write_manifest(opts, "check", cfg, seed, {});
  return v.faulty ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dropout-based Bayesian BNN test toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string cmd;
  for (const auto& [name, desc] :
       std::vector<std::pair<std::string, std::string>>{
           {"train", "train a binarized Bayesian MLP and persist model + dataset"},
           {"gen-tests", "generate ranked test vectors and the uncertainty profile"},
           {"campaign", "run a Monte Carlo fault-injection campaign"},
           {"roc", "replay recorded campaign sessions into an ROC table"},
           {"check", "run one live health-check session (exit 1 when faulty)"}}) {
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", opts.config_path, "JSON config file (defaults when absent)");
    sub->add_option("--out-dir", opts.out_dir, "output directory (default: out)");
    auto* seed_opt = sub->add_option("--seed", opts.seed, "master seed override");
    sub->add_option("--threads", opts.threads, "worker threads (campaign only)");
    sub->callback([&cmd, name = name, seed_opt, &opts]() {
      cmd = name;
      opts.seed_set = seed_opt->count() > 0;
    });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd == "train") return cmd_train(opts);
    if (cmd == "gen-tests") return cmd_gen_tests(opts);
    if (cmd == "campaign") return cmd_campaign(opts);
    if (cmd == "roc") return cmd_roc(opts);
    if (cmd == "check") return cmd_check(opts);
    std::cerr << "unknown command\n";
    return 2;
  } catch (const spintest::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const spintest::spec_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
