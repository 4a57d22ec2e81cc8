// Copyright 2026 The mixdpo Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "mixdpo/io/serialize.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "mixdpo/error.hpp"

namespace mixdpo::io {
namespace {

template <typename T>
T get(const Json& j, const char* key, const std::string& context) {
  if (!j.contains(key)) {
    throw Error(context + ": missing key \"" + key + "\"");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(context + ": bad value for \"" + key + "\": " + e.what());
  }
}

Json gating_to_json(const core::Gating& g) {
  if (g.is_fixed()) {
    return Json{{"type", "fixed"}, {"weights", g.fixed_params().weights}};
  }
  return Json{{"type", "linear"},
              {"weight", matrix_to_json(g.linear_params().weight)},
              {"bias", g.linear_params().bias}};
}

core::Gating gating_from_json(const Json& j) {
  const std::string type = get<std::string>(j, "type", "gating");
  if (type == "fixed") {
    expect_keys(j, {"type", "weights"}, "gating");
    return core::Gating::fixed(get<Vector>(j, "weights", "gating"));
  }
  if (type == "linear") {
    expect_keys(j, {"type", "weight", "bias"}, "gating");
    return core::Gating::linear(matrix_from_json(j.at("weight")),
                                get<Vector>(j, "bias", "gating"));
  }
  throw Error("gating: unknown type \"" + type + "\"");
}

std::string trim_line(const std::string& line) {
  std::size_t end = line.size();
  while (end > 0 && (line[end - 1] == '\r' || line[end - 1] == ' ')) --end;
  return line.substr(0, end);
}

}  // namespace

Json ground_truth_options_to_json(const synth::GroundTruthOptions& o) {
  return Json{
      {"own_mass", o.own_mass},
      {"base_scale", o.base_scale},
      {"style_noise", o.style_noise},
      {"reference_scale", o.reference_scale},
      {"feature_signal", o.feature_signal},
      {"feature_noise", o.feature_noise},
      {"nuisance_dims", o.nuisance_dims},
      {"nuisance_scale", o.nuisance_scale},
      {"pair_sampling", o.pair_sampling == synth::PairSampling::kUniform
                            ? "uniform"
                            : "reference"},
      {"user_tasks", o.user_tasks},
      {"user_signal", o.user_signal},
      {"user_noise", o.user_noise},
      {"user_nuisance_dims", o.user_nuisance_dims},
  };
}

Json optimizer_config_to_json(const em::OptimizerConfig& c) {
  return Json{{"kind", optimizer_kind_name(c.kind)},
              {"momentum", c.momentum},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"epsilon", c.epsilon}};
}

em::OptimizerConfig optimizer_config_from_json(const Json& j) {
  const std::string ctx = "optimizer";
  expect_keys(j, {"kind", "momentum", "beta1", "beta2", "epsilon"}, ctx);
  em::OptimizerConfig c;
  if (j.contains("kind")) {
    c.kind = parse_optimizer_kind(get<std::string>(j, "kind", ctx));
  }
  if (j.contains("momentum")) c.momentum = get<double>(j, "momentum", ctx);
  if (j.contains("beta1")) c.beta1 = get<double>(j, "beta1", ctx);
  if (j.contains("beta2")) c.beta2 = get<double>(j, "beta2", ctx);
  if (j.contains("epsilon")) c.epsilon = get<double>(j, "epsilon", ctx);
  return c;
}

std::string optimizer_kind_name(em::OptimizerKind kind) {
  switch (kind) {
    case em::OptimizerKind::kSgd:
      return "sgd";
    case em::OptimizerKind::kMomentum:
      return "momentum";
    case em::OptimizerKind::kAdam:
      return "adam";
  }
  return "sgd";
}

em::OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return em::OptimizerKind::kSgd;
  if (name == "momentum") return em::OptimizerKind::kMomentum;
  if (name == "adam") return em::OptimizerKind::kAdam;
  throw Error("unknown optimizer \"" + name + "\"");
}

void expect_keys(const Json& obj, std::initializer_list<const char*> allowed,
                 const std::string& context) {
  if (!obj.is_object()) throw Error(context + ": expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!keys.count(item.key())) {
      throw Error(context + ": unknown key \"" + item.key() + "\"");
    }
  }
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(Vector(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) throw Error("matrix: expected an array of rows");
  try {
    return Matrix::from_rows(j.get<std::vector<Vector>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("matrix: ") + e.what());
  }
}

Json model_to_json(const core::Model& model) {
  Json policies = Json::array();
  for (const auto& p : model.policies)
    policies.push_back(matrix_to_json(p.logits()));
  Json rewards = Json::array();
  for (const auto& r : model.rewards)
    rewards.push_back(matrix_to_json(r.values));
  Json refs = Json::array();
  for (const auto& r : model.references)
    refs.push_back(matrix_to_json(r.log_probs()));
  return Json{{"num_prompts", model.space.num_prompts},
              {"vocab_size", model.space.vocab_size},
              {"num_experts", model.space.num_experts},
              {"prompt_features", matrix_to_json(model.space.prompt_features)},
              {"user_feature_dim", model.user_feature_dim},
              {"policy_logits", policies},
              {"rewards", rewards},
              {"reference_log_probs", refs},
              {"gating", gating_to_json(model.gating)}};
}

core::Model model_from_json(const Json& j) {
  const std::string ctx = "model";
  expect_keys(j,
              {"num_prompts", "vocab_size", "num_experts", "prompt_features",
               "user_feature_dim", "policy_logits", "rewards",
               "reference_log_probs", "gating"},
              ctx);
  core::Model model;
  model.space.num_prompts = get<int>(j, "num_prompts", ctx);
  model.space.vocab_size = get<int>(j, "vocab_size", ctx);
  model.space.num_experts = get<int>(j, "num_experts", ctx);
  model.space.prompt_features = matrix_from_json(j.at("prompt_features"));
  model.user_feature_dim = get<int>(j, "user_feature_dim", ctx);
  for (const auto& p : j.at("policy_logits")) {
    model.policies.emplace_back(matrix_from_json(p));
  }
  for (const auto& r : j.at("rewards")) {
    model.rewards.push_back(core::RewardTable{matrix_from_json(r)});
  }
  for (const auto& r : j.at("reference_log_probs")) {
    model.references.push_back(
        core::ReferencePolicy::from_log_probs(matrix_from_json(r)));
  }
  model.gating = gating_from_json(j.at("gating"));
  model.validate();
  return model;
}

Json ground_truth_to_json(const synth::GroundTruth& gt) {
  Json rewards = Json::array();
  for (const auto& r : gt.rewards) rewards.push_back(matrix_to_json(r));
  Json j{{"schema_version", kSchemaVersion},
         {"kind", "mixdpo.ground_truth"},
         {"num_prompts", gt.space.num_prompts},
         {"vocab_size", gt.space.vocab_size},
         {"num_experts", gt.space.num_experts},
         {"prompt_features", matrix_to_json(gt.space.prompt_features)},
         {"rewards", rewards},
         {"gating", matrix_to_json(gt.gating)},
         {"reference_log_probs", matrix_to_json(gt.reference.log_probs())},
         {"prompt_group", gt.prompt_group},
         {"seed", gt.seed},
         {"separation", gt.separation},
         {"options", ground_truth_options_to_json(gt.options)}};
  if (gt.user_gate) {
    j["user_gate"] = Json{{"weight", matrix_to_json(gt.user_gate->weight)},
                          {"bias", gt.user_gate->bias}};
  }
  return j;
}

synth::GroundTruthOptions ground_truth_options_from_json(const Json& j) {
  const std::string ctx = "ground truth options";
  expect_keys(j,
              {"own_mass", "base_scale", "style_noise", "reference_scale",
               "feature_signal", "feature_noise", "nuisance_dims",
               "nuisance_scale", "pair_sampling", "user_tasks", "user_signal",
               "user_noise", "user_nuisance_dims"},
              ctx);
  synth::GroundTruthOptions o;
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) {
      field = get<std::decay_t<decltype(field)>>(j, key, ctx);
    }
  };
  opt("own_mass", o.own_mass);
  opt("base_scale", o.base_scale);
  opt("style_noise", o.style_noise);
  opt("reference_scale", o.reference_scale);
  opt("feature_signal", o.feature_signal);
  opt("feature_noise", o.feature_noise);
  opt("nuisance_dims", o.nuisance_dims);
  opt("nuisance_scale", o.nuisance_scale);
  opt("user_tasks", o.user_tasks);
  opt("user_signal", o.user_signal);
  opt("user_noise", o.user_noise);
  opt("user_nuisance_dims", o.user_nuisance_dims);
  if (j.contains("pair_sampling")) {
    const std::string s = get<std::string>(j, "pair_sampling", ctx);
    if (s == "uniform") {
      o.pair_sampling = synth::PairSampling::kUniform;
    } else if (s == "reference") {
      o.pair_sampling = synth::PairSampling::kReference;
    } else {
      throw Error(ctx + ": unknown pair_sampling \"" + s + "\"");
    }
  }
  o.validate();
  return o;
}

synth::GroundTruth ground_truth_from_json(const Json& j) {
  const std::string ctx = "ground truth";
  expect_keys(
      j,
      {"schema_version", "kind", "num_prompts", "vocab_size", "num_experts",
       "prompt_features", "rewards", "gating", "reference_log_probs",
       "prompt_group", "seed", "separation", "options", "user_gate"},
      ctx);
  require(get<int>(j, "schema_version", ctx) == kSchemaVersion,
          "ground truth: unsupported schema version");
  synth::GroundTruth gt;
  gt.space.num_prompts = get<int>(j, "num_prompts", ctx);
  gt.space.vocab_size = get<int>(j, "vocab_size", ctx);
  gt.space.num_experts = get<int>(j, "num_experts", ctx);
  gt.space.prompt_features = matrix_from_json(j.at("prompt_features"));
  gt.space.validate();
  for (const auto& r : j.at("rewards"))
    gt.rewards.push_back(matrix_from_json(r));
  gt.gating = matrix_from_json(j.at("gating"));
  gt.reference = core::ReferencePolicy::from_log_probs(
      matrix_from_json(j.at("reference_log_probs")));
  gt.prompt_group = get<std::vector<int>>(j, "prompt_group", ctx);
  gt.seed = get<std::uint64_t>(j, "seed", ctx);
  gt.separation = get<double>(j, "separation", ctx);
  gt.options = ground_truth_options_from_json(j.at("options"));
  if (j.contains("user_gate")) {
    const Json& u = j.at("user_gate");
    expect_keys(u, {"weight", "bias"}, "user_gate");
    gt.user_gate = core::LinearGating{matrix_from_json(u.at("weight")),
                                      get<Vector>(u, "bias", "user_gate")};
  }
  require(gt.num_experts() == gt.space.num_experts,
          "ground truth: reward table count must equal K");
  return gt;
}

std::string dataset_to_jsonl(const core::Dataset& dataset) {
  std::ostringstream out;
  const Json header{
      {"record", "header"},
      {"schema_version", kSchemaVersion},
      {"num_prompts", dataset.space.num_prompts},
      {"vocab_size", dataset.space.vocab_size},
      {"num_sources", dataset.space.num_experts},
      {"user_feature_dim", dataset.user_feature_dim},
      {"prompt_features", matrix_to_json(dataset.space.prompt_features)},
      {"reference_log_probs", matrix_to_json(dataset.reference.log_probs())}};
  out << header.dump() << '\n';
  for (const auto& t : dataset.triplets) {
    Json rec{{"prompt_id", t.prompt_id},
             {"y_plus", t.y_plus},
             {"y_minus", t.y_minus}};
    if (t.source_label) rec["source_label"] = *t.source_label;
    if (!t.user_features.empty()) rec["user_features"] = t.user_features;
    out << rec.dump() << '\n';
  }
  return out.str();
}

core::Dataset dataset_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  core::Dataset data;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_line(line);
    if (line.empty()) continue;
    const std::string ctx = "dataset line " + std::to_string(line_no);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ctx + ": " + e.what());
    }
    if (!have_header) {
      expect_keys(j,
                  {"record", "schema_version", "num_prompts", "vocab_size",
                   "num_sources", "user_feature_dim", "prompt_features",
                   "reference_log_probs"},
                  ctx);
      require(get<std::string>(j, "record", ctx) == "header",
              ctx + ": first record must be the header");
      require(get<int>(j, "schema_version", ctx) == kSchemaVersion,
              ctx + ": unsupported schema version");
      data.space.num_prompts = get<int>(j, "num_prompts", ctx);
      data.space.vocab_size = get<int>(j, "vocab_size", ctx);
      data.space.num_experts = get<int>(j, "num_sources", ctx);
      data.user_feature_dim = get<int>(j, "user_feature_dim", ctx);
      data.space.prompt_features = matrix_from_json(j.at("prompt_features"));
      data.reference = core::ReferencePolicy::from_log_probs(
          matrix_from_json(j.at("reference_log_probs")));
      have_header = true;
      continue;
    }
    expect_keys(
        j, {"prompt_id", "y_plus", "y_minus", "source_label", "user_features"},
        ctx);
    core::PreferenceTriplet t;
    t.prompt_id = get<int>(j, "prompt_id", ctx);
    t.y_plus = get<int>(j, "y_plus", ctx);
    t.y_minus = get<int>(j, "y_minus", ctx);
    if (j.contains("source_label") && !j.at("source_label").is_null()) {
      t.source_label = get<int>(j, "source_label", ctx);
    }
    if (j.contains("user_features")) {
      t.user_features = get<Vector>(j, "user_features", ctx);
    }
    data.triplets.push_back(std::move(t));
  }
  require(have_header, "dataset: missing header record");
  data.validate();
  return data;
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw Error("rename to " + path.string() + " failed: " + ec.message());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void save_dataset(const std::filesystem::path& path,
                  const core::Dataset& dataset) {
  write_text_atomic(path, dataset_to_jsonl(dataset));
}

core::Dataset load_dataset(const std::filesystem::path& path) {
  return dataset_from_jsonl(read_text(path));
}

void save_ground_truth(const std::filesystem::path& path,
                       const synth::GroundTruth& gt) {
  write_text_atomic(path, ground_truth_to_json(gt).dump(1) + "\n");
}

synth::GroundTruth load_ground_truth(const std::filesystem::path& path) {
  try {
    return ground_truth_from_json(Json::parse(read_text(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

Checkpoint checkpoint_from_state(const em::TrainState& state,
                                 const Json& config) {
  Checkpoint c;
  c.model = state.model;
  c.iteration = state.iteration;
  c.epoch = state.epoch;
  c.converged = state.converged;
  std::ostringstream rng;
  rng << state.rng;
  c.rng_state = rng.str();
  c.elbo_trace = state.elbo_trace;
  c.optimizers = state.policy_optimizers;
  c.config = config;
  return c;
}

Json checkpoint_to_json(const Checkpoint& c) {
  Json opts = Json::array();
  for (const auto& o : c.optimizers) {
    opts.push_back(Json{{"config", optimizer_config_to_json(o.config())},
                        {"first_moment", o.first_moment()},
                        {"second_moment", o.second_moment()},
                        {"steps", o.steps()}});
  }
  return Json{{"schema_version", kSchemaVersion},
              {"kind", "mixdpo.checkpoint"},
              {"iteration", c.iteration},
              {"epoch", c.epoch},
              {"converged", c.converged},
              {"rng_state", c.rng_state},
              {"elbo_trace", c.elbo_trace},
              {"optimizers", opts},
              {"config", c.config},
              {"model", model_to_json(c.model)}};
}

Checkpoint checkpoint_from_json(const Json& j) {
  const std::string ctx = "checkpoint";
  expect_keys(j,
              {"schema_version", "kind", "iteration", "epoch", "converged",
               "rng_state", "elbo_trace", "optimizers", "config", "model"},
              ctx);
  require(get<int>(j, "schema_version", ctx) == kSchemaVersion,
          "checkpoint: unsupported schema version");
  Checkpoint c;
  c.iteration = get<long long>(j, "iteration", ctx);
  c.epoch = get<int>(j, "epoch", ctx);
  c.converged = get<bool>(j, "converged", ctx);
  c.rng_state = get<std::string>(j, "rng_state", ctx);
  c.elbo_trace = get<std::vector<double>>(j, "elbo_trace", ctx);
  for (const auto& o : j.at("optimizers")) {
    expect_keys(o, {"config", "first_moment", "second_moment", "steps"},
                "optimizer state");
    Vector m = get<Vector>(o, "first_moment", "optimizer state");
    em::Optimizer opt(optimizer_config_from_json(o.at("config")), m.size());
    opt.set_state(std::move(m),
                  get<Vector>(o, "second_moment", "optimizer state"),
                  get<long long>(o, "steps", "optimizer state"));
    c.optimizers.push_back(std::move(opt));
  }
  c.config = j.at("config");
  c.model = model_from_json(j.at("model"));
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_text_atomic(path, checkpoint_to_json(c).dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return checkpoint_from_json(Json::parse(read_text(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv(const std::vector<em::EpochMetrics>& metrics) {
  std::ostringstream out;
  out << "epoch,elbo,mbt_loss,gating_ce,beta,tau,lambda_ent,lambda_conf,"
         "lambda_kl_unif,lambda_kl_w,lambda_kl_w_global";
  const Matrix* shape =
      metrics.empty() ? nullptr : &metrics.front().source_responsibility;
  if (shape) {
    for (std::size_t s = 0; s < shape->rows(); ++s) {
      for (std::size_t k = 0; k < shape->cols(); ++k) {
        out << ",q_s" << s << "_k" << k;
      }
    }
  }
  out << '\n';
  for (const auto& m : metrics) {
    out << m.epoch << ',' << format_double(m.elbo) << ','
        << format_double(m.mbt_loss) << ',' << format_double(m.gating_ce) << ','
        << format_double(m.beta) << ',' << format_double(m.tau) << ','
        << format_double(m.lambdas.ent) << ',' << format_double(m.lambdas.conf)
        << ',' << format_double(m.lambdas.kl_unif) << ','
        << format_double(m.lambdas.kl_w) << ','
        << format_double(m.lambdas.kl_w_global);
    for (double v : m.source_responsibility.data()) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace mixdpo::io
