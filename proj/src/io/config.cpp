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
#include "mixdpo/io/config.hpp"

#include <array>
#include <set>
#include <utility>

#include "mixdpo/error.hpp"
#include "mixdpo/seed.hpp"

namespace mixdpo::io {
namespace {

template <typename E, std::size_t N>
using EnumTable = std::array<std::pair<E, const char*>, N>;

template <typename E, std::size_t N>
std::string enum_name(const EnumTable<E, N>& table, E value) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  throw Error("unnamed enum value");
}

template <typename E, std::size_t N>
E enum_parse(const EnumTable<E, N>& table, const std::string& name,
             const std::string& what) {
  for (const auto& [v, n] : table) {
    if (name == n) return v;
  }
  std::string options;
  for (const auto& [v, n] : table) {
    options += options.empty() ? "" : ", ";
    options += n;
  }
  throw Error("unknown " + what + " \"" + name +
              "\" (expected one of: " + options + ")");
}

constexpr EnumTable<Algorithm, 3> kAlgorithms{{
    {Algorithm::kEm, "em"},
    {Algorithm::kEmRegularized, "em-regularized"},
    {Algorithm::kMc, "mc"},
}};
constexpr EnumTable<em::GatingMode, 2> kGatingModes{{
    {em::GatingMode::kMix, "mix"},
    {em::GatingMode::kMoe, "moe"},
}};
constexpr EnumTable<em::PartitionMode, 2> kPartitionModes{{
    {em::PartitionMode::kExact, "exact"},
    {em::PartitionMode::kMinibatch, "minibatch"},
}};
constexpr EnumTable<em::WeightUpdate, 2> kWeightUpdates{{
    {em::WeightUpdate::kMinibatchAverage, "minibatch_average"},
    {em::WeightUpdate::kEma, "ema"},
}};
constexpr EnumTable<em::RewardRule, 2> kRewardRules{{
    {em::RewardRule::kSinglePass, "single_pass"},
    {em::RewardRule::kCanonical, "canonical"},
}};
constexpr EnumTable<core::LrKind, 2> kLrKinds{{
    {core::LrKind::kConstant, "constant"},
    {core::LrKind::kRobbinsMonro, "robbins_monro"},
}};
constexpr EnumTable<mc::AnnealMode, 2> kAnnealModes{{
    {mc::AnnealMode::kConstant, "constant"},
    {mc::AnnealMode::kExponential, "exponential"},
}};
constexpr EnumTable<mc::RewardParam, 2> kRewardParams{{
    {mc::RewardParam::kTable, "table"},
    {mc::RewardParam::kPolicy, "policy"},
}};

// Reads optional keys of one object and rejects keys it was not asked for.
class Section {
 public:
  Section(const Json& j, std::string context)
      : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw Error(context_ + ": expected an object");
  }

  template <typename T>
  void opt(const char* key, T& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      field = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(context_ + "." + key + ": " + e.what());
    }
  }

  template <typename E, std::size_t N>
  void opt_enum(const char* key, E& field, const EnumTable<E, N>& table) {
    std::string name;
    opt(key, name);
    if (!name.empty()) field = enum_parse(table, name, context_ + "." + key);
  }

  // Returns the child object if present, marking the key as known.
  const Json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw Error(context_ + ": unknown key \"" + item.key() + "\"");
      }
    }
  }

  const std::string& context() const { return context_; }

 private:
  const Json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

Json lr_to_json(const core::LearningRate& lr) {
  return Json{{"kind", enum_name(kLrKinds, lr.kind)},
              {"eta0", lr.eta0},
              {"decay", lr.decay}};
}

void lr_from_json(const Json& j, const std::string& ctx,
                  core::LearningRate& lr) {
  Section s(j, ctx);
  s.opt_enum("kind", lr.kind, kLrKinds);
  s.opt("eta0", lr.eta0);
  s.opt("decay", lr.decay);
  s.finish();
}

Json lambdas_to_json(const core::Lambdas& l) {
  return Json{{"ent", l.ent},
              {"conf", l.conf},
              {"kl_unif", l.kl_unif},
              {"kl_w", l.kl_w},
              {"kl_w_global", l.kl_w_global}};
}

void lambdas_from_json(const Json& j, const std::string& ctx,
                       core::Lambdas& l) {
  Section s(j, ctx);
  s.opt("ent", l.ent);
  s.opt("conf", l.conf);
  s.opt("kl_unif", l.kl_unif);
  s.opt("kl_w", l.kl_w);
  s.opt("kl_w_global", l.kl_w_global);
  s.finish();
}

Json init_to_json(const em::InitOptions& o) {
  return Json{{"policy_noise", o.policy_noise},
              {"gating_noise", o.gating_noise},
              {"tied", o.tied},
              {"per_expert_reference", o.per_expert_reference}};
}

void init_from_json(const Json& j, em::InitOptions& o) {
  Section s(j, "train.init");
  s.opt("policy_noise", o.policy_noise);
  s.opt("gating_noise", o.gating_noise);
  s.opt("tied", o.tied);
  s.opt("per_expert_reference", o.per_expert_reference);
  s.finish();
}

Json trainer_to_json(const em::TrainerConfig& c) {
  const auto& h = c.hyper;
  return Json{{"mode", gating_mode_name(c.mode)},
              {"trainable_policies", c.trainable_policies},
              {"trainable_weights", c.trainable_weights},
              {"optimizer", optimizer_config_to_json(c.optimizer)},
              {"beta", h.beta},
              {"learning_rate", lr_to_json(h.learning_rate)},
              {"gating_learning_rate", lr_to_json(c.gating_learning_rate)},
              {"lambdas", lambdas_to_json(h.lambdas)},
              {"batch_size", h.batch_size},
              {"max_iters", h.max_iters},
              {"elbo_tol", h.elbo_tol},
              {"epochs", c.epochs},
              {"partition_mode", enum_name(kPartitionModes, c.partition_mode)},
              {"weight_update", enum_name(kWeightUpdates, c.weight_update)},
              {"ema_decay", c.ema_decay},
              {"reward_rule", enum_name(kRewardRules, c.reward_rule)}};
}

void trainer_from_json(const Json& j, em::TrainerConfig& c) {
  Section s(j, "train.trainer");
  auto& h = c.hyper;
  s.opt_enum("mode", c.mode, kGatingModes);
  s.opt("trainable_policies", c.trainable_policies);
  s.opt("trainable_weights", c.trainable_weights);
  if (const Json* o = s.child("optimizer")) {
    c.optimizer = optimizer_config_from_json(*o);
  }
  s.opt("beta", h.beta);
  if (const Json* o = s.child("learning_rate")) {
    lr_from_json(*o, "train.trainer.learning_rate", h.learning_rate);
  }
  if (const Json* o = s.child("gating_learning_rate")) {
    lr_from_json(*o, "train.trainer.gating_learning_rate",
                 c.gating_learning_rate);
  }
  if (const Json* o = s.child("lambdas")) {
    lambdas_from_json(*o, "train.trainer.lambdas", h.lambdas);
  }
  s.opt("batch_size", h.batch_size);
  s.opt("max_iters", h.max_iters);
  s.opt("elbo_tol", h.elbo_tol);
  s.opt("epochs", c.epochs);
  s.opt_enum("partition_mode", c.partition_mode, kPartitionModes);
  s.opt_enum("weight_update", c.weight_update, kWeightUpdates);
  s.opt("ema_decay", c.ema_decay);
  s.opt_enum("reward_rule", c.reward_rule, kRewardRules);
  s.finish();
}

Json schedule_to_json(const reg::RegSchedule& schedule) {
  Json phases = Json::array();
  for (const auto& p : schedule.phases) {
    phases.push_back(Json{{"start_epoch", p.start_epoch},
                          {"lambdas", lambdas_to_json(p.lambdas)},
                          {"beta", p.beta}});
  }
  return Json{{"phases", phases},
              {"allow_both_entropy", schedule.allow_both_entropy}};
}

reg::RegSchedule schedule_from_json(const Json& j) {
  reg::RegSchedule schedule;
  Section s(j, "train.schedule");
  s.opt("allow_both_entropy", schedule.allow_both_entropy);
  if (const Json* phases = s.child("phases")) {
    if (!phases->is_array())
      throw Error("train.schedule.phases: expected an array");
    for (std::size_t i = 0; i < phases->size(); ++i) {
      const std::string ctx =
          "train.schedule.phases[" + std::to_string(i) + "]";
      reg::Phase phase;
      Section ps(phases->at(i), ctx);
      ps.opt("start_epoch", phase.start_epoch);
      ps.opt("beta", phase.beta);
      if (const Json* l = ps.child("lambdas")) {
        lambdas_from_json(*l, ctx + ".lambdas", phase.lambdas);
      }
      ps.finish();
      schedule.phases.push_back(phase);
    }
  }
  s.finish();
  return schedule;
}

Json mc_to_json(const mc::McConfig& c) {
  return Json{{"tau_start", c.tau_start},
              {"tau_end", c.tau_end},
              {"anneal", enum_name(kAnnealModes, c.anneal)},
              {"samples", c.samples},
              {"kl_weight", c.kl_weight},
              {"reward_param", enum_name(kRewardParams, c.reward_param)},
              {"trainable_rewards", c.trainable_rewards},
              {"trainable_gating", c.trainable_gating},
              {"learning_rate", lr_to_json(c.learning_rate)},
              {"gating_learning_rate", lr_to_json(c.gating_learning_rate)},
              {"batch_size", c.batch_size},
              {"reward_rule", enum_name(kRewardRules, c.reward_rule)}};
}

void mc_from_json(const Json& j, mc::McConfig& c) {
  Section s(j, "train.mc");
  s.opt("tau_start", c.tau_start);
  s.opt("tau_end", c.tau_end);
  s.opt_enum("anneal", c.anneal, kAnnealModes);
  s.opt("samples", c.samples);
  s.opt("kl_weight", c.kl_weight);
  s.opt_enum("reward_param", c.reward_param, kRewardParams);
  s.opt("trainable_rewards", c.trainable_rewards);
  s.opt("trainable_gating", c.trainable_gating);
  if (const Json* o = s.child("learning_rate")) {
    lr_from_json(*o, "train.mc.learning_rate", c.learning_rate);
  }
  if (const Json* o = s.child("gating_learning_rate")) {
    lr_from_json(*o, "train.mc.gating_learning_rate", c.gating_learning_rate);
  }
  s.opt("batch_size", c.batch_size);
  s.opt_enum("reward_rule", c.reward_rule, kRewardRules);
  s.finish();
}

std::filesystem::path in_out(const PathConfig& p, const std::string& value,
                             const char* fallback) {
  if (!value.empty()) return value;
  return std::filesystem::path(p.out) / fallback;
}

}  // namespace

std::string algorithm_name(Algorithm a) { return enum_name(kAlgorithms, a); }

Algorithm parse_algorithm(const std::string& name) {
  return enum_parse(kAlgorithms, name, "algorithm");
}

std::string gating_mode_name(em::GatingMode m) {
  return enum_name(kGatingModes, m);
}

em::GatingMode parse_gating_mode(const std::string& name) {
  return enum_parse(kGatingModes, name, "mode");
}

std::filesystem::path RunConfig::dataset_path() const {
  return in_out(paths, paths.dataset, "dataset.jsonl");
}

std::filesystem::path RunConfig::ground_truth_path() const {
  return in_out(paths, paths.ground_truth, "ground_truth.json");
}

std::filesystem::path RunConfig::checkpoint_path() const {
  return in_out(paths, paths.checkpoint, "checkpoint.json");
}

std::filesystem::path RunConfig::metrics_path() const {
  return std::filesystem::path(paths.out) / "metrics.csv";
}

void RunConfig::propagate() {
  auto& t = train;
  t.init.seed = derive_seed(seed, kInitStream);
  t.init.mode = t.trainer.mode;
  t.init.beta = t.trainer.hyper.beta;
  t.trainer.seed = derive_seed(seed, kTrainStream);
  t.mc.seed = derive_seed(seed, kTrainStream);
  t.mc.epochs = t.trainer.epochs;
  t.mc.beta = t.trainer.hyper.beta;
}

void RunConfig::validate() const {
  require(generate.num_experts >= 1, "generate.num_experts must be >= 1");
  require(generate.num_prompts >= 1, "generate.num_prompts must be >= 1");
  require(generate.vocab_size >= 2, "generate.vocab_size must be >= 2");
  require(generate.separation >= 0.0, "generate.separation must be >= 0");
  require(generate.count >= 1, "empty dataset requested");
  generate.options.validate();
  require(train.num_experts >= 0, "train.num_experts must be >= 0");
  require(train.trainer.epochs >= 0, "train.trainer.epochs must be >= 0");
  train.trainer.validate();
  if (train.algorithm == Algorithm::kEmRegularized && train.schedule) {
    train.schedule->validate();
  }
  if (train.algorithm == Algorithm::kMc) train.mc.validate();
}

Json run_config_to_json(const RunConfig& c) {
  Json train{{"algorithm", algorithm_name(c.train.algorithm)},
             {"num_experts", c.train.num_experts},
             {"init", init_to_json(c.train.init)},
             {"trainer", trainer_to_json(c.train.trainer)},
             {"mc", mc_to_json(c.train.mc)}};
  if (c.train.schedule) train["schedule"] = schedule_to_json(*c.train.schedule);
  return Json{{"schema_version", kSchemaVersion},
              {"seed", c.seed},
              {"generate",
               {{"num_experts", c.generate.num_experts},
                {"num_prompts", c.generate.num_prompts},
                {"vocab_size", c.generate.vocab_size},
                {"separation", c.generate.separation},
                {"count", c.generate.count},
                {"options", ground_truth_options_to_json(c.generate.options)}}},
              {"train", train},
              {"paths",
               {{"out", c.paths.out},
                {"dataset", c.paths.dataset},
                {"ground_truth", c.paths.ground_truth},
                {"checkpoint", c.paths.checkpoint}}}};
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  Section root(j, "config");
  int version = kSchemaVersion;
  root.opt("schema_version", version);
  require(version == kSchemaVersion,
          "config: unsupported schema_version " + std::to_string(version));
  root.opt("seed", c.seed);
  if (const Json* g = root.child("generate")) {
    Section s(*g, "generate");
    s.opt("num_experts", c.generate.num_experts);
    s.opt("num_prompts", c.generate.num_prompts);
    s.opt("vocab_size", c.generate.vocab_size);
    s.opt("separation", c.generate.separation);
    s.opt("count", c.generate.count);
    if (const Json* o = s.child("options")) {
      c.generate.options = ground_truth_options_from_json(*o);
    }
    s.finish();
  }
  if (const Json* t = root.child("train")) {
    Section s(*t, "train");
    std::string algorithm;
    s.opt("algorithm", algorithm);
    if (!algorithm.empty()) c.train.algorithm = parse_algorithm(algorithm);
    s.opt("num_experts", c.train.num_experts);
    if (const Json* o = s.child("init")) init_from_json(*o, c.train.init);
    if (const Json* o = s.child("trainer"))
      trainer_from_json(*o, c.train.trainer);
    if (const Json* o = s.child("schedule")) {
      if (!o->is_null()) c.train.schedule = schedule_from_json(*o);
    }
    if (const Json* o = s.child("mc")) mc_from_json(*o, c.train.mc);
    s.finish();
  }
  if (const Json* p = root.child("paths")) {
    Section s(*p, "paths");
    s.opt("out", c.paths.out);
    s.opt("dataset", c.paths.dataset);
    s.opt("ground_truth", c.paths.ground_truth);
    s.opt("checkpoint", c.paths.checkpoint);
    s.finish();
  }
  root.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  try {
    return run_config_from_json(Json::parse(read_text(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace mixdpo::io
