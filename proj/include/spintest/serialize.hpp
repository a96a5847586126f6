#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "spintest/atpg.hpp"
#include "spintest/campaign.hpp"
#include "spintest/dataset.hpp"
#include "spintest/detector.hpp"
#include "spintest/error.hpp"
#include "spintest/fault_context.hpp"
#include "spintest/network.hpp"
#include "spintest/tensor.hpp"

namespace spintest {

using nlohmann::json;

// ---------------------------------------------------------------------------
// enum <-> string
// ---------------------------------------------------------------------------

inline std::string method_name(DropoutMethod m) {
  switch (m) {
    case DropoutMethod::SpinDrop: return "spin_drop";
    case DropoutMethod::SpatialSpinDrop: return "spatial_spin_drop";
    case DropoutMethod::ScaleDrop: return "scale_drop";
  }
  throw contract_error("method_name: unknown method");
}

inline DropoutMethod method_from_name(const std::string& s) {
  if (s == "spin_drop") return DropoutMethod::SpinDrop;
  if (s == "spatial_spin_drop") return DropoutMethod::SpatialSpinDrop;
  if (s == "scale_drop") return DropoutMethod::ScaleDrop;
  throw io_error("unknown dropout method: " + s);
}

inline std::string sharing_name(Sharing s) {
  switch (s) {
    case Sharing::PerColumn: return "per_column";
    case Sharing::LayerShared: return "layer_shared";
    case Sharing::GlobalShared: return "global_shared";
  }
  throw contract_error("sharing_name: unknown sharing");
}

inline Sharing sharing_from_name(const std::string& s) {
  if (s == "per_column") return Sharing::PerColumn;
  if (s == "layer_shared") return Sharing::LayerShared;
  if (s == "global_shared") return Sharing::GlobalShared;
  throw io_error("unknown sharing scope: " + s);
}

inline std::string location_name(FaultLocation l) {
  switch (l) {
    case FaultLocation::WeightCells: return "weight_cells";
    case FaultLocation::BufferMemory: return "buffer_memory";
    case FaultLocation::DropoutModule: return "dropout_module";
    case FaultLocation::MacConductance: return "mac_conductance";
  }
  throw contract_error("location_name: unknown location");
}

inline FaultLocation location_from_name(const std::string& s) {
  if (s == "weight_cells") return FaultLocation::WeightCells;
  if (s == "buffer_memory") return FaultLocation::BufferMemory;
  if (s == "dropout_module") return FaultLocation::DropoutModule;
  if (s == "mac_conductance") return FaultLocation::MacConductance;
  throw io_error("unknown fault location: " + s);
}

inline std::string kind_name(FaultKind k) {
  switch (k) {
    case FaultKind::StuckAt0: return "stuck_at_0";
    case FaultKind::StuckAt1: return "stuck_at_1";
    case FaultKind::BitFlip: return "bit_flip";
    case FaultKind::AdditiveGaussian: return "additive_gaussian";
    case FaultKind::MultiplicativeGaussian: return "multiplicative_gaussian";
    case FaultKind::DropProbVariation: return "drop_prob_variation";
  }
  throw contract_error("kind_name: unknown kind");
}

inline FaultKind kind_from_name(const std::string& s) {
  if (s == "stuck_at_0") return FaultKind::StuckAt0;
  if (s == "stuck_at_1") return FaultKind::StuckAt1;
  if (s == "bit_flip") return FaultKind::BitFlip;
  if (s == "additive_gaussian") return FaultKind::AdditiveGaussian;
  if (s == "multiplicative_gaussian") return FaultKind::MultiplicativeGaussian;
  if (s == "drop_prob_variation") return FaultKind::DropProbVariation;
  throw io_error("unknown fault kind: " + s);
}

inline std::string fault_class_name(FaultClass c) {
  return c == FaultClass::Critical ? "critical" : "benign";
}

// ---------------------------------------------------------------------------
// file IO
// ---------------------------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw io_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw io_error("malformed JSON in " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// model
// ---------------------------------------------------------------------------

inline json model_to_json(const BinaryNetwork& net) {
  net.validate();
  json j;
  j["format"] = "spintest-model";
  j["version"] = 1;
  j["method"] = method_name(net.method);
  j["dropout_p"] = net.dropout_p;
  j["group_size"] = net.group_size;
  j["scale_gamma"] = net.scale_gamma;
  j["sharing"] = sharing_name(net.sharing);
  json layers = json::array();
  for (const Layer& l : net.layers) {
    json jl;
    jl["in_dim"] = l.in_dim();
    jl["out_dim"] = l.out_dim();
    jl["has_dropout"] = l.has_dropout;
    jl["is_output"] = l.is_output;
    json w = json::array();
    for (Bit b : l.weights.data()) w.push_back(static_cast<int>(b));
    jl["weights"] = std::move(w);  // row-major, -1/+1
    jl["bn_gamma"] = l.bn_gamma;
    jl["bn_beta"] = l.bn_beta;
    jl["bn_mean"] = l.bn_mean;
    jl["bn_var"] = l.bn_var;
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  return j;
}

inline BinaryNetwork model_from_json(const json& j) {
  try {
    if (j.at("format") != "spintest-model") throw io_error("not a model file");
    BinaryNetwork net;
    net.method = method_from_name(j.at("method").get<std::string>());
    net.dropout_p = j.at("dropout_p").get<double>();
    net.group_size = j.at("group_size").get<int>();
    net.scale_gamma = j.at("scale_gamma").get<double>();
    net.sharing = sharing_from_name(j.at("sharing").get<std::string>());
    for (const json& jl : j.at("layers")) {
      Layer l;
      const auto rows = jl.at("in_dim").get<std::size_t>();
      const auto cols = jl.at("out_dim").get<std::size_t>();
      const auto& w = jl.at("weights");
      if (w.size() != rows * cols) throw io_error("weight array size mismatch");
      l.weights = BitMat(rows, cols);
      for (std::size_t k = 0; k < w.size(); ++k)
        l.weights.data()[k] = static_cast<Bit>(w[k].get<int>());
      l.bn_gamma = jl.at("bn_gamma").get<RealVec>();
      l.bn_beta = jl.at("bn_beta").get<RealVec>();
      l.bn_mean = jl.at("bn_mean").get<RealVec>();
      l.bn_var = jl.at("bn_var").get<RealVec>();
      l.has_dropout = jl.at("has_dropout").get<bool>();
      l.is_output = jl.at("is_output").get<bool>();
      net.layers.push_back(std::move(l));
    }
    net.validate();
    return net;
  } catch (const json::exception& e) {
    throw io_error(std::string("model JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// dataset
// ---------------------------------------------------------------------------

inline json dataset_to_json(const Dataset& ds) {
  ds.validate();
  json j;
  j["format"] = "spintest-dataset";
  j["version"] = 1;
  j["dim"] = ds.dim;
  j["n_classes"] = ds.n_classes;
  auto dump_split = [](const std::vector<BitVec>& xs, const std::vector<int>& ys) {
    json s;
    json inputs = json::array();
    for (const BitVec& x : xs) {
      json row = json::array();
      for (Bit b : x) row.push_back(static_cast<int>(b));
      inputs.push_back(std::move(row));
    }
    s["inputs"] = std::move(inputs);
    s["labels"] = ys;
    return s;
  };
  j["train"] = dump_split(ds.train_inputs, ds.train_labels);
  j["eval"] = dump_split(ds.eval_inputs, ds.eval_labels);
  return j;
}

inline Dataset dataset_from_json(const json& j) {
  try {
    if (j.at("format") != "spintest-dataset") throw io_error("not a dataset file");
    Dataset ds;
    ds.dim = j.at("dim").get<int>();
    ds.n_classes = j.at("n_classes").get<int>();
    auto load_split = [](const json& s, std::vector<BitVec>& xs, std::vector<int>& ys) {
      for (const json& row : s.at("inputs")) {
        BitVec x(row.size());
        for (std::size_t i = 0; i < row.size(); ++i)
          x[i] = static_cast<Bit>(row[i].get<int>());
        xs.push_back(std::move(x));
      }
      ys = s.at("labels").get<std::vector<int>>();
    };
    load_split(j.at("train"), ds.train_inputs, ds.train_labels);
    load_split(j.at("eval"), ds.eval_inputs, ds.eval_labels);
    ds.validate();
    return ds;
  } catch (const json::exception& e) {
    throw io_error(std::string("dataset JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// test kit (vectors + profile)
// ---------------------------------------------------------------------------

inline json test_vectors_to_json(const TestVectorSet& tvs) {
  tvs.validate();
  json j;
  j["format"] = "spintest-test-vectors";
  j["version"] = 1;
  j["repetitions"] = tvs.repetitions;
  j["passes"] = tvs.passes;
  j["seed"] = tvs.seed;
  json vecs = json::array();
  for (const ScoredVector& v : tvs.vectors) {
    json jv;
    json in = json::array();
    for (Bit b : v.input) in.push_back(static_cast<int>(b));
    jv["input"] = std::move(in);
    jv["score"] = v.repeatability_score;
    jv["train_index"] = v.train_index;
    vecs.push_back(std::move(jv));
  }
  j["vectors"] = std::move(vecs);
  return j;
}

inline TestVectorSet test_vectors_from_json(const json& j) {
  try {
    if (j.at("format") != "spintest-test-vectors") throw io_error("not a test-vector file");
    TestVectorSet tvs;
    tvs.repetitions = j.at("repetitions").get<int>();
    tvs.passes = j.at("passes").get<int>();
    tvs.seed = j.at("seed").get<std::uint64_t>();
    for (const json& jv : j.at("vectors")) {
      ScoredVector v;
      const auto& in = jv.at("input");
      v.input.resize(in.size());
      for (std::size_t i = 0; i < in.size(); ++i)
        v.input[i] = static_cast<Bit>(in[i].get<int>());
      v.repeatability_score = jv.at("score").get<double>();
      v.train_index = jv.at("train_index").get<std::size_t>();
      tvs.vectors.push_back(std::move(v));
    }
    tvs.validate();
    return tvs;
  } catch (const json::exception& e) {
    throw io_error(std::string("test-vector JSON: ") + e.what());
  }
}

inline json profile_to_json(const UncertaintyProfile& p) {
  p.validate();
  json j;
  j["format"] = "spintest-profile";
  j["version"] = 1;
  j["mu"] = p.mu;
  j["sigma"] = p.sigma;
  j["b_upper"] = p.b_upper;
  j["b_lower"] = p.b_lower;
  j["fit_samples"] = p.fit_samples;
  return j;
}

inline UncertaintyProfile profile_from_json(const json& j) {
  try {
    if (j.at("format") != "spintest-profile") throw io_error("not a profile file");
    UncertaintyProfile p;
    p.mu = j.at("mu").get<double>();
    p.sigma = j.at("sigma").get<double>();
    p.b_upper = j.at("b_upper").get<double>();
    p.b_lower = j.at("b_lower").get<double>();
    p.fit_samples = j.at("fit_samples").get<std::size_t>();
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw io_error(std::string("profile JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// fault specs / sweeps / campaign config
// ---------------------------------------------------------------------------

inline json fault_spec_to_json(const FaultSpec& s) {
  json j;
  j["location"] = location_name(s.location);
  j["kind"] = kind_name(s.kind);
  j["rate"] = s.rate;
  j["sigma"] = s.sigma;
  j["seed"] = s.seed;
  return j;
}

inline FaultSpec fault_spec_from_json(const json& j) {
  FaultSpec s;
  s.location = location_from_name(j.at("location").get<std::string>());
  s.kind = kind_from_name(j.at("kind").get<std::string>());
  s.rate = j.value("rate", 0.0);
  s.sigma = j.value("sigma", 0.0);
  s.seed = j.value("seed", std::uint64_t{0});
  return s;
}

inline json sweep_to_json(const SweepSpec& s) {
  json j = fault_spec_to_json(s.base);
  j["name"] = s.name;
  j["values"] = s.values;
  return j;
}

inline SweepSpec sweep_from_json(const json& j) {
  SweepSpec s;
  s.base = fault_spec_from_json(j);
  s.name = j.value("name", location_name(s.base.location) + ":" + kind_name(s.base.kind));
  s.values = j.at("values").get<std::vector<double>>();
  return s;
}

inline json campaign_config_to_json(const CampaignConfig& c) {
  json j;
  j["injections_per_point"] = c.injections_per_point;
  j["eval_subset"] = c.eval_subset;
  j["t_acc"] = c.t_acc;
  j["delta_acc"] = c.delta_acc;
  j["vote_length"] = c.vote_length;
  j["t_detect"] = c.t_detect;
  j["control_sessions"] = c.control_sessions;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  json sweeps = json::array();
  for (const SweepSpec& s : c.sweeps) sweeps.push_back(sweep_to_json(s));
  j["sweeps"] = std::move(sweeps);
  return j;
}

inline CampaignConfig campaign_config_from_json(const json& j) {
  try {
    CampaignConfig c;
    c.injections_per_point = j.value("injections_per_point", c.injections_per_point);
    c.eval_subset = j.value("eval_subset", c.eval_subset);
    c.t_acc = j.value("t_acc", c.t_acc);
    c.delta_acc = j.value("delta_acc", c.delta_acc);
    c.vote_length = j.value("vote_length", c.vote_length);
    c.t_detect = j.value("t_detect", c.t_detect);
    c.control_sessions = j.value("control_sessions", c.control_sessions);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    if (j.contains("sweeps"))
      for (const json& js : j.at("sweeps")) c.sweeps.push_back(sweep_from_json(js));
    return c;
  } catch (const json::exception& e) {
    throw io_error(std::string("campaign config JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// campaign results (full records, so ROC replay never re-simulates)
// ---------------------------------------------------------------------------

inline json campaign_result_to_json(const CampaignResult& r) {
  json j;
  j["format"] = "spintest-campaign";
  j["version"] = 1;
  j["config"] = campaign_config_to_json(r.config);
  j["clean_accuracy"] = r.clean_accuracy;
  j["control_fpr"] = r.control_fpr;
  json controls = json::array();
  for (const Verdict& v : r.control_verdicts) {
    json jc;
    jc["faulty"] = v.faulty;
    RealVec us;
    std::vector<int> pos;
    for (const QueryRecord& q : v.record) {
      us.push_back(q.uncertainty);
      pos.push_back(q.positive ? 1 : 0);
    }
    jc["uncertainties"] = us;
    jc["positives"] = pos;
    controls.push_back(std::move(jc));
  }
  j["controls"] = std::move(controls);
  json points = json::array();
  for (const PointResult& p : r.points) {
    json jp;
    jp["sweep_name"] = p.sweep_name;
    jp["spec"] = fault_spec_to_json(p.spec);
    jp["value"] = p.value;
    jp["clean_accuracy"] = p.clean_accuracy;
    jp["mean_faulty_accuracy"] = p.mean_faulty_accuracy;
    jp["std_faulty_accuracy"] = p.std_faulty_accuracy;
    jp["benign_count"] = p.benign_count;
    jp["critical_count"] = p.critical_count;
    jp["detected_benign"] = p.detected_benign;
    jp["detected_critical"] = p.detected_critical;
    jp["coverage_critical"] = p.coverage_critical;
    jp["coverage_benign"] = p.coverage_benign;
    jp["fpr"] = p.fpr;
    json recs = json::array();
    for (const InjectionRecord& rec : p.records) {
      json jr;
      jr["injection"] = rec.injection;
      jr["faulty_accuracy"] = rec.faulty_accuracy;
      jr["class"] = fault_class_name(rec.cls);
      jr["detected"] = rec.detected;
      jr["queries_used"] = rec.queries_used;
      RealVec us;
      std::vector<int> pos;
      for (const QueryRecord& q : rec.record) {
        us.push_back(q.uncertainty);
        pos.push_back(q.positive ? 1 : 0);
      }
      jr["uncertainties"] = us;
      jr["positives"] = pos;
      recs.push_back(std::move(jr));
    }
    jp["records"] = std::move(recs);
    points.push_back(std::move(jp));
  }
  j["points"] = std::move(points);
  return j;
}

inline CampaignResult campaign_result_from_json(const json& j) {
  try {
    if (j.at("format") != "spintest-campaign") throw io_error("not a campaign result file");
    CampaignResult r;
    r.config = campaign_config_from_json(j.at("config"));
    r.clean_accuracy = j.at("clean_accuracy").get<double>();
    r.control_fpr = j.at("control_fpr").get<double>();
    auto load_record = [](const json& src, std::vector<QueryRecord>& out) {
      const auto us = src.at("uncertainties").get<RealVec>();
      const auto pos = src.at("positives").get<std::vector<int>>();
      if (us.size() != pos.size()) throw io_error("record arrays length mismatch");
      for (std::size_t i = 0; i < us.size(); ++i)
        out.push_back({us[i], pos[i] != 0});
    };
    for (const json& jc : j.at("controls")) {
      Verdict v;
      v.faulty = jc.at("faulty").get<bool>();
      load_record(jc, v.record);
      r.control_verdicts.push_back(std::move(v));
    }
    int sweep_idx = 0;
    for (const json& jp : j.at("points")) {
      PointResult p;
      p.sweep_name = jp.at("sweep_name").get<std::string>();
      p.spec = fault_spec_from_json(jp.at("spec"));
      p.value = jp.at("value").get<double>();
      p.clean_accuracy = jp.at("clean_accuracy").get<double>();
      p.mean_faulty_accuracy = jp.at("mean_faulty_accuracy").get<double>();
      p.std_faulty_accuracy = jp.at("std_faulty_accuracy").get<double>();
      p.benign_count = jp.at("benign_count").get<int>();
      p.critical_count = jp.at("critical_count").get<int>();
      p.detected_benign = jp.at("detected_benign").get<int>();
      p.detected_critical = jp.at("detected_critical").get<int>();
      p.coverage_critical = jp.at("coverage_critical").get<double>();
      p.coverage_benign = jp.at("coverage_benign").get<double>();
      p.fpr = jp.at("fpr").get<double>();
      for (const json& jr : jp.at("records")) {
        InjectionRecord rec;
        rec.injection = jr.at("injection").get<int>();
        rec.faulty_accuracy = jr.at("faulty_accuracy").get<double>();
        rec.cls = jr.at("class").get<std::string>() == "critical" ? FaultClass::Critical
                                                                  : FaultClass::Benign;
        rec.detected = jr.at("detected").get<bool>();
        rec.queries_used = jr.at("queries_used").get<int>();
        load_record(jr, rec.record);
        p.records.push_back(std::move(rec));
      }
      r.points.push_back(std::move(p));
      ++sweep_idx;
    }
    return r;
  } catch (const json::exception& e) {
    throw io_error(std::string("campaign result JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV reports (one file per figure-equivalent)
// ---------------------------------------------------------------------------

inline std::string csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Header: sweep,location,kind,value,clean_accuracy,mean_faulty_accuracy,
///         std_faulty_accuracy,benign,critical
inline std::string accuracy_sweep_csv(const CampaignResult& r) {
  std::string out =
      "sweep,location,kind,value,clean_accuracy,mean_faulty_accuracy,"
      "std_faulty_accuracy,benign,critical\n";
  for (const PointResult& p : r.points) {
    out += p.sweep_name + "," + location_name(p.spec.location) + "," +
           kind_name(p.spec.kind) + "," + csv_double(p.value) + "," +
           csv_double(p.clean_accuracy) + "," + csv_double(p.mean_faulty_accuracy) + "," +
           csv_double(p.std_faulty_accuracy) + "," + std::to_string(p.benign_count) +
           "," + std::to_string(p.critical_count) + "\n";
  }
  return out;
}

/// Header: sweep,location,kind,value,critical,detected_critical,
///         coverage_critical,benign,detected_benign,coverage_benign,fpr
inline std::string coverage_csv(const CampaignResult& r) {
  std::string out =
      "sweep,location,kind,value,critical,detected_critical,coverage_critical,"
      "benign,detected_benign,coverage_benign,fpr\n";
  for (const PointResult& p : r.points) {
    out += p.sweep_name + "," + location_name(p.spec.location) + "," +
           kind_name(p.spec.kind) + "," + csv_double(p.value) + "," +
           std::to_string(p.critical_count) + "," + std::to_string(p.detected_critical) +
           "," + csv_double(p.coverage_critical) + "," + std::to_string(p.benign_count) +
           "," + std::to_string(p.detected_benign) + "," + csv_double(p.coverage_benign) +
           "," + csv_double(p.fpr) + "\n";
  }
  return out;
}

/// Header: L,fpr  (control sessions re-thresholded at each L)
inline std::string fpr_vs_l_csv(const CampaignResult& r, const std::vector<int>& l_values) {
  std::string out = "L,fpr\n";
  for (int l : l_values) {
    int n = 0, hits = 0;
    for (const Verdict& v : r.control_verdicts) {
      if (l < 1 || static_cast<std::size_t>(l) > v.record.size())
        throw spec_error("fpr_vs_l_csv: L out of range of the recorded sessions");
      ++n;
      hits += replay_verdict(v.record, l).faulty ? 1 : 0;
    }
    out += std::to_string(l) + "," +
           csv_double(n > 0 ? static_cast<double>(hits) / n : 0.0) + "\n";
  }
  return out;
}

/// Header: L,tpr_critical,tpr_benign,fpr
inline std::string roc_csv(const std::vector<RocPoint>& roc) {
  std::string out = "L,tpr_critical,tpr_benign,fpr\n";
  for (const RocPoint& p : roc)
    out += std::to_string(p.vote_length) + "," + csv_double(p.tpr_critical) + "," +
           csv_double(p.tpr_benign) + "," + csv_double(p.fpr) + "\n";
  return out;
}

}  // namespace spintest
