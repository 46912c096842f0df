/*
 * Copyright 2026 The vflda Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
// Command-line front end: key generation, synthetic data, secure training
// phases, evaluation, protocol verification and ablations.

#include <gmp.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "json.hpp"
#include "vflda/adversarial.h"
#include "vflda/data.h"
#include "vflda/errors.h"
#include "vflda/experiment.h"
#include "vflda/metrics.h"
#include "vflda/oracle.h"
#include "vflda/phe.h"
#include "vflda/protocol.h"
#include "vflda/secure_lr.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using vflda::ConfigError;
using vflda::experiment::Experiment;
using vflda::protocol::PartyId;

constexpr const char* kVersion = "0.1.0";

std::string g_command_line;

json ReadJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void WriteJson(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json Versions() {
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "."
        << EIGEN_MINOR_VERSION;
  std::ostringstream nl;
  nl << NLOHMANN_JSON_VERSION_MAJOR << "." << NLOHMANN_JSON_VERSION_MINOR
     << "." << NLOHMANN_JSON_VERSION_PATCH;
  return {{"vflda", kVersion},
          {"gmp", gmp_version},
          {"eigen", eigen.str()},
          {"nlohmann_json", nl.str()},
          {"cli11", CLI11_VERSION},
#if defined(__clang__)
          {"compiler", "clang " __clang_version__}
#elif defined(__GNUC__)
          {"compiler", "gcc " __VERSION__}
#else
          {"compiler", "unknown"}
#endif
  };
}

void WriteManifest(const fs::path& dir, const std::string& command,
                   const Experiment* e, const json& extra = json::object()) {
  json m = {{"command", command},
            {"command_line", g_command_line},
            {"versions", Versions()}};
  if (e) {
    m["config_hash"] = vflda::experiment::ConfigHash(e->config);
    m["config_origin"] = e->origin;
    m["seed"] = e->run.seed;
    m["run"] = e->run.ToJson();
  }
  m.update(extra);
  WriteJson(dir / "manifest.json", m);
}

void WriteHistory(const fs::path& dir, const vflda::protocol::History& h,
                  int log_interval) {
  const auto lines = h.ToJsonLines(log_interval);
  std::ofstream jl(dir / "history.jsonl");
  for (const auto& l : lines) jl << l.dump() << "\n";
  std::ofstream csv(dir / "history.csv");
  csv << "phase,epoch,iteration,loss_ce,loss_adv,group_accuracy_mean\n";
  csv << std::setprecision(10);
  for (const auto& it : h.iterations) {
    if (it.iteration % log_interval != 0) continue;
    csv << it.phase << "," << it.epoch << "," << it.iteration << ","
        << it.loss_ce << ",";
    if (it.loss_adv) csv << *it.loss_adv;
    csv << ",";
    if (!it.group_accuracy.empty()) {
      double s = 0.0;
      for (double a : it.group_accuracy) s += a;
      csv << s / static_cast<double>(it.group_accuracy.size());
    }
    csv << "\n";
  }
}

vflda::phe::Keypair LoadKeys(const fs::path& path) {
  return vflda::phe::KeypairFromJson(ReadJson(path));
}

vflda::phe::Keypair KeysOrGenerate(const std::string& path,
                                   const Experiment& e) {
  if (!path.empty()) {
    vflda::phe::Keypair k = LoadKeys(path);
    return k;
  }
  return vflda::phe::GenerateKeypair(
      e.run.key_bits,
      vflda::protocol::StreamSeed(e.run.seed, vflda::protocol::Stream::kKeygen));
}

vflda::adversarial::PassiveModel FreshModel(const Experiment& e) {
  return vflda::adversarial::PassiveModel::Create(
      e.spec, e.data, e.arch, vflda::protocol::ModelSeedsFor(e.run.seed));
}

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

json LastIteration(const vflda::protocol::History& h) {
  if (h.iterations.empty()) return nullptr;
  const auto& it = h.iterations.back();
  json j = {{"iteration", it.iteration}, {"loss_ce", it.loss_ce}};
  if (it.loss_adv) j["loss_adv"] = *it.loss_adv;
  if (!it.group_accuracy.empty()) j["group_accuracy"] = it.group_accuracy;
  return j;
}

void MaybeTranscript(const fs::path& dir, bool enabled,
                     vflda::protocol::SecureExchange& ex) {
  if (!enabled) return;
  std::ofstream out(dir / "transcript.jsonl");
  ex.bus().WriteTranscript(out);
}

void SaveActive(const fs::path& model_dir, std::string_view tag,
                vflda::protocol::SecureExchange& ex) {
  WriteJson(model_dir / ("active_" + std::string(tag) + ".json"),
            vflda::secure_lr::SplitStateToJson(ex.active().state()));
  WriteJson(model_dir / ("noise_" + std::string(tag) + ".json"),
            vflda::secure_lr::NoiseStateToJson(ex.passive().noise()));
}

// ---------------------------------------------------------------------------

struct KeygenArgs {
  int bits = 1024;
  std::uint64_t seed = 0;
  bool seeded = false;
  std::string out;
};

int Keygen(const KeygenArgs& a) {
  vflda::phe::Keypair keys;
  if (a.seeded) {
    keys = vflda::phe::GenerateKeypair(a.bits, a.seed);
  } else {
    std::random_device rd;
    const std::uint64_t s = (std::uint64_t{rd()} << 32) ^ rd();
    keys = vflda::phe::GenerateKeypair(a.bits, s);
  }
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  WriteJson(out, vflda::phe::KeypairToJson(keys));
  std::cout << "wrote " << a.bits << "-bit keypair to " << a.out << "\n";
  return 0;
}

struct SynthArgs {
  std::string config;
  std::uint64_t seed = 0;
  bool seeded = false;
  std::string out;
};

int SynthData(const SynthArgs& a) {
  json cfg = ReadJson(a.config);
  const json* s = &cfg;
  if (cfg.contains("data") && cfg["data"].contains("synth")) {
    s = &cfg["data"]["synth"];
  }
  const vflda::data::SynthConfig sc = vflda::data::SynthConfig::FromJson(*s);
  const std::uint64_t seed =
      a.seeded ? a.seed : s->value("seed", std::uint64_t{0});
  const vflda::data::SynthResult r = vflda::data::SynthShift(sc, seed);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  vflda::data::WriteCsv(r.dataset, out.string());
  json groups = json::array();
  for (const auto& [name, cols] : r.groups) {
    groups.push_back({{"name", name}, {"columns", cols}});
  }
  fs::path schema_path = out;
  schema_path += ".schema.json";
  WriteJson(schema_path, {{"schema", r.schema.ToJson()},
                          {"groups", groups},
                          {"split", r.split.ToJson()},
                          {"synth", sc.ToJson()},
                          {"seed", seed}});
  std::cout << "wrote " << r.dataset.num_rows() << " rows to " << a.out
            << " (schema: " << schema_path.string() << ")\n";
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string keys;
  std::string pretrained;
  std::string out;
  bool transcript = false;
};

int PretrainCmd(const TrainArgs& a) {
  const Experiment e = vflda::experiment::Load(a.config);
  const auto keys = KeysOrGenerate(a.keys, e);
  const auto shards = vflda::protocol::Shards::Build(e.data, e.split);
  auto model = FreshModel(e);
  vflda::protocol::SecureExchange ex(keys, e.spec.g(), e.run,
                                     /*keep_payloads=*/false);
  const auto start = std::chrono::steady_clock::now();
  const auto h = vflda::protocol::Pretrain(e.run, e.data, &model, ex,
                                           shards.source_p, shards.source_c,
                                           shards.target_all_c);
  const double secs = Seconds(start);

  const fs::path dir(a.out);
  fs::create_directories(dir / "model");
  WriteJson(dir / "model" / "c_model.json", model.ToJson());
  WriteJson(dir / "model" / "keys.json", vflda::phe::KeypairToJson(keys));
  SaveActive(dir / "model", "b", ex);
  WriteHistory(dir, h, e.run.log_interval);
  MaybeTranscript(dir, a.transcript, ex);
  const json metrics = {{"phase", "pretrain"},
                        {"iterations", ex.iteration()},
                        {"messages", ex.bus().size()},
                        {"seconds", secs},
                        {"last", LastIteration(h)}};
  WriteJson(dir / "metrics.json", metrics);
  WriteManifest(dir, "pretrain", &e);
  std::cout << "pretrain: " << ex.iteration() << " iterations in "
            << std::fixed << std::setprecision(2) << secs << " s\n"
            << metrics["last"].dump() << "\n";
  return 0;
}

int FinetuneCmd(const TrainArgs& a) {
  const Experiment e = vflda::experiment::Load(a.config);
  const auto shards = vflda::protocol::Shards::Build(e.data, e.split);
  auto model = FreshModel(e);
  vflda::phe::Keypair keys;
  if (!a.pretrained.empty()) {
    const fs::path pre = fs::path(a.pretrained) / "model";
    model.LoadJson(ReadJson(pre / "c_model.json"));
    keys = a.keys.empty() ? LoadKeys(pre / "keys.json") : LoadKeys(a.keys);
  } else {
    keys = KeysOrGenerate(a.keys, e);
  }
  vflda::protocol::SecureExchange ex(keys, e.spec.g(), e.run,
                                     /*keep_payloads=*/false);
  const auto start = std::chrono::steady_clock::now();
  const auto h = vflda::protocol::Finetune(e.run, e.data, &model, ex,
                                           shards.target_p, shards.target_c);
  const double secs = Seconds(start);
  const auto eval = vflda::protocol::Evaluate(e.run, e.data, &model, ex,
                                              shards.test_p, shards.test_c);

  const fs::path dir(a.out);
  fs::create_directories(dir / "model");
  WriteJson(dir / "model" / "c_model.json", model.ToJson());
  WriteJson(dir / "model" / "keys.json", vflda::phe::KeypairToJson(keys));
  SaveActive(dir / "model", "a", ex);
  WriteHistory(dir, h, e.run.log_interval);
  MaybeTranscript(dir, a.transcript, ex);
  const json metrics = {{"phase", "finetune"},
                        {"pretrained", a.pretrained},
                        {"iterations", ex.iteration()},
                        {"messages", ex.bus().size()},
                        {"seconds", secs},
                        {"last", LastIteration(h)},
                        {"test", {{"auc", eval.auc}, {"ks", eval.ks}}}};
  WriteJson(dir / "metrics.json", metrics);
  WriteManifest(dir, "finetune", &e);
  std::cout << "finetune: " << ex.iteration() << " iterations in "
            << std::fixed << std::setprecision(2) << secs << " s\n"
            << std::setprecision(4) << "test AUC " << eval.auc << "  KS "
            << eval.ks << "\n";
  return 0;
}

struct EvalArgs {
  std::string config;
  std::string model;
  std::string split = "test";
  std::string out;
};

int EvaluateCmd(const EvalArgs& a) {
  const Experiment e = vflda::experiment::Load(a.config);
  const auto shards = vflda::protocol::Shards::Build(e.data, e.split);
  const fs::path mdir = fs::path(a.model) / "model";
  auto model = FreshModel(e);
  model.LoadJson(ReadJson(mdir / "c_model.json"));
  const auto keys = LoadKeys(mdir / "keys.json");
  PartyId party = PartyId::kA;
  std::string tag = "a";
  if (!fs::exists(mdir / "active_a.json")) {
    party = PartyId::kB;
    tag = "b";
  }
  const auto state = vflda::secure_lr::SplitStateFromJson(
      ReadJson(mdir / ("active_" + tag + ".json")));
  const auto noise = vflda::secure_lr::NoiseStateFromJson(
      ReadJson(mdir / ("noise_" + tag + ".json")));
  vflda::protocol::SecureExchange ex(keys, e.spec.g(), e.run);
  ex.Restore(party, state, noise);

  const vflda::data::PartyView* p = nullptr;
  const vflda::data::PartyView* c = nullptr;
  if (a.split == "test") {
    p = &shards.test_p;
    c = &shards.test_c;
  } else if (a.split == "target") {
    p = &shards.target_p;
    c = &shards.target_c;
  } else if (a.split == "source") {
    p = &shards.source_p;
    c = &shards.source_c;
  } else {
    throw ConfigError("--split: expected test, target or source, got '" +
                      a.split + "'");
  }
  const auto eval = vflda::protocol::Evaluate(e.run, e.data, &model, ex, *p, *c);
  const json metrics = {{"split", a.split},
                        {"party", tag},
                        {"rows", eval.labels.size()},
                        {"auc", eval.auc},
                        {"ks", eval.ks}};
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    WriteJson(fs::path(a.out) / "metrics.json", metrics);
    WriteManifest(a.out, "evaluate", &e, {{"model", a.model}});
  }
  std::cout << std::fixed << std::setprecision(4) << a.split << " ("
            << eval.labels.size() << " rows, party " << tag << "): AUC "
            << eval.auc << "  KS " << eval.ks << "\n";
  return 0;
}

struct VerifyArgs {
  std::string config;
  std::string keys;
  std::int64_t iters = 50;
  double constant = vflda::oracle::kToleranceConstant;
  std::string out;
};

int VerifyCmd(const VerifyArgs& a) {
  const Experiment e = vflda::experiment::Load(a.config);
  if (a.iters <= 0) throw ConfigError("--iters must be positive");
  const auto keys = KeysOrGenerate(a.keys, e);
  const auto r = vflda::oracle::VerifyProtocol(e.run, e.data, e.split, e.spec,
                                               e.arch, keys, a.iters,
                                               a.constant);
  std::cout << r.report.Summary() << "\n"
            << std::fixed << std::setprecision(2)
            << "secure " << r.secure_seconds << " s, plaintext "
            << r.plain_seconds << " s\n";
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    json report = r.report.ToJson();
    report["secure_seconds"] = r.secure_seconds;
    report["plain_seconds"] = r.plain_seconds;
    WriteJson(fs::path(a.out) / "metrics.json", report);
    WriteHistory(a.out, r.secure, 1);
    WriteManifest(a.out, "verify-protocol", &e);
  }
  return r.report.pass ? 0 : 2;
}

struct AblateArgs {
  std::string config;
  std::string variants = "prada,no_ir,no_fg_ir,no_da_fg_ir";
  std::string setting = "BtoA";
  int seeds = 1;
  std::string out;
};

int AblateCmd(const AblateArgs& a) {
  const Experiment base = vflda::experiment::Load(a.config);
  const auto variants = vflda::experiment::ParseVariantList(a.variants);
  const auto setting = vflda::oracle::ParseSetting(a.setting);
  if (a.seeds <= 0) throw ConfigError("--seeds must be positive");
  json rows = json::array();
  std::cout << std::left << std::setw(14) << "variant" << std::setw(5) << "g"
            << "AUC (mean +- std over " << a.seeds << " seeds)\n";
  for (const auto v : variants) {
    const Experiment e = vflda::experiment::ApplyVariant(base, v);
    std::vector<double> aucs;
    for (int s = 0; s < a.seeds; ++s) {
      auto run = e.run;
      run.seed = e.run.seed + static_cast<std::uint64_t>(s);
      const auto r = vflda::oracle::OracleTrain(run, e.data, e.split, e.spec,
                                                e.arch, setting);
      aucs.push_back(r.evaluation.auc);
    }
    double mean = 0.0;
    for (double x : aucs) mean += x;
    mean /= static_cast<double>(aucs.size());
    double var = 0.0;
    for (double x : aucs) var += (x - mean) * (x - mean);
    const double sd =
        aucs.size() > 1 ? std::sqrt(var / static_cast<double>(aucs.size() - 1))
                        : 0.0;
    const int g = e.spec.g();
    std::cout << std::left << std::setw(14)
              << vflda::experiment::VariantName(v) << std::setw(5) << g
              << std::fixed << std::setprecision(4) << mean << " +- " << sd
              << "\n";
    rows.push_back({{"variant", vflda::experiment::VariantName(v)},
                    {"g", g},
                    {"auc", aucs},
                    {"auc_mean", mean},
                    {"auc_std", sd}});
  }
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    WriteJson(fs::path(a.out) / "metrics.json",
              {{"setting", a.setting}, {"variants", rows}});
    WriteManifest(a.out, "ablate", &base);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) {
    if (i) g_command_line += ' ';
    g_command_line += argv[i];
  }
  CLI::App app{"Three-party vertical federated domain adaptation simulator"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  KeygenArgs kg;
  auto* keygen = app.add_subcommand("keygen", "Generate a Paillier keypair");
  keygen->add_option("--bits", kg.bits, "Modulus size in bits")
      ->check(CLI::Range(64, 8192));
  auto* kg_seed = keygen->add_option("--seed", kg.seed,
                                     "Deterministic seed (testing only)");
  keygen->add_option("--out", kg.out, "Output JSON file")->required();

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth-data", "Write a synthetic dataset");
  synth->add_option("--config", sy.config, "Config with a data.synth section")
      ->required()
      ->check(CLI::ExistingFile);
  auto* sy_seed = synth->add_option("--seed", sy.seed, "Generator seed");
  synth->add_option("--out", sy.out, "Output CSV path")->required();

  TrainArgs pt;
  auto* pretrain = app.add_subcommand("pretrain", "Secure B+C pretraining");
  pretrain->add_option("--config", pt.config)->required()->check(
      CLI::ExistingFile);
  pretrain->add_option("--keys", pt.keys, "Keypair JSON (default: derived "
                                          "from the run seed)")
      ->check(CLI::ExistingFile);
  pretrain->add_option("--out", pt.out, "Run directory")->required();
  pretrain->add_flag("--transcript", pt.transcript,
                     "Write the message digest transcript");

  TrainArgs ft;
  auto* finetune = app.add_subcommand("finetune", "Secure A+C finetuning");
  finetune->add_option("--config", ft.config)->required()->check(
      CLI::ExistingFile);
  finetune->add_option("--pretrained", ft.pretrained,
                       "Run directory of a pretrain (omit for A-VFL)")
      ->check(CLI::ExistingDirectory);
  finetune->add_option("--keys", ft.keys)->check(CLI::ExistingFile);
  finetune->add_option("--out", ft.out, "Run directory")->required();
  finetune->add_flag("--transcript", ft.transcript);

  EvalArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score a trained run");
  evaluate->add_option("--config", ev.config)->required()->check(
      CLI::ExistingFile);
  evaluate->add_option("--model", ev.model, "Run directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--split", ev.split, "test, target or source");
  evaluate->add_option("--out", ev.out, "Optional output directory");

  VerifyArgs vp;
  auto* verify = app.add_subcommand(
      "verify-protocol", "Compare secure and plaintext training trajectories");
  verify->add_option("--config", vp.config)->required()->check(
      CLI::ExistingFile);
  verify->add_option("--iters", vp.iters, "Pretrain iterations to compare");
  verify->add_option("--keys", vp.keys)->check(CLI::ExistingFile);
  verify->add_option("--tolerance-constant", vp.constant);
  verify->add_option("--out", vp.out, "Optional output directory");

  AblateArgs ab;
  auto* ablate = app.add_subcommand("ablate", "Run model variants (plaintext)");
  ablate->add_option("--config", ab.config)->required()->check(
      CLI::ExistingFile);
  ablate->add_option("--variants", ab.variants, "Comma-separated variants");
  ablate->add_option("--setting", ab.setting,
                     "ALocal, AVFL, ABVFL or BtoA");
  ablate->add_option("--seeds", ab.seeds, "Number of run seeds");
  ablate->add_option("--out", ab.out, "Optional output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*keygen) {
      kg.seeded = kg_seed->count() > 0;
      return Keygen(kg);
    }
    if (*synth) {
      sy.seeded = sy_seed->count() > 0;
      return SynthData(sy);
    }
    if (*pretrain) return PretrainCmd(pt);
    if (*finetune) return FinetuneCmd(ft);
    if (*evaluate) return EvaluateCmd(ev);
    if (*verify) return VerifyCmd(vp);
    if (*ablate) return AblateCmd(ab);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const vflda::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const vflda::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return 2;
  } catch (const vflda::CryptoError& e) {
    std::cerr << "crypto error: " << e.what() << "\n";
    return 2;
  } catch (const vflda::DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
