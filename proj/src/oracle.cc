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

#include "vflda/oracle.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "vflda/errors.h"

namespace vflda::oracle {

using protocol::PartyId;

void PlainExchange::Connect(PartyId active, const secure_lr::LRWeights& init) {
  parties_[active] = Party{init, 0};
  current_ = active;
}

const PlainExchange::Party& PlainExchange::current() const {
  auto it = parties_.find(current_);
  if (it == parties_.end()) throw ProtocolError("no active party connected");
  return it->second;
}

secure_lr::LRWeights& PlainExchange::mutable_weights() {
  current();
  return parties_[current_].w;
}

protocol::LabelExchange::Step PlainExchange::TrainStep(
    const Matrix& mu, const Matrix& x_p, const std::vector<int>& labels,
    double eta) {
  Party& p = parties_.at(current_);
  const Eigen::Index batch = mu.rows();
  if (x_p.rows() != batch || static_cast<Eigen::Index>(labels.size()) != batch) {
    throw DimensionError("mu, x^p and labels are misaligned");
  }
  if (mu.cols() != p.w.w_c.size() || x_p.cols() != p.w.w_p.size()) {
    throw DimensionError("feature widths do not match the LR weights");
  }
  if (batch == 0) throw DimensionError("empty batch");
  const Vector z = mu * p.w.w_c + x_p * p.w.w_p + Vector::Constant(batch, p.w.b);
  Vector delta(batch);
  Step step;
  step.logits.assign(z.data(), z.data() + batch);
  double total = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const nn::BceResult r = nn::BceFromLogit(z[b], labels[b]);
    total += r.loss;
    delta[b] = r.dloss_dlogit;
  }
  step.loss = total / batch;
  p.w.w_c -= eta * (mu.transpose() * delta / batch);
  p.w.w_p -= eta * (x_p.transpose() * delta / batch);
  p.w.b -= eta * delta.mean();
  if (!p.w.w_c.allFinite() || !p.w.w_p.allFinite() || !std::isfinite(p.w.b)) {
    throw NumericError("non-finite LR weights after update");
  }
  ++p.t;
  // Per-sample delta^l * W^C_{t+1}.
  step.delta_c = delta * p.w.w_c.transpose();
  return step;
}

std::vector<double> PlainExchange::Predict(const Matrix& mu, const Matrix& x_p) {
  const Party& p = current();
  if (mu.rows() == 0) return {};
  const Vector z = mu * p.w.w_c + x_p * p.w.w_p +
                   Vector::Constant(mu.rows(), p.w.b);
  std::vector<double> out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = nn::Sigmoid(z[i]);
  return out;
}

secure_lr::LRWeights PlainExchange::Weights() const { return current().w; }

std::int64_t PlainExchange::iteration() const { return current().t; }

Setting ParseSetting(std::string_view name) {
  if (name == "ALocal" || name == "A-Local") return Setting::kALocal;
  if (name == "AVFL" || name == "A-VFL") return Setting::kAVFL;
  if (name == "ABVFL" || name == "AB-VFL") return Setting::kABVFL;
  if (name == "BtoA" || name == "B->A") return Setting::kBtoA;
  throw ConfigError("unknown setting '" + std::string(name) +
                    "' (expected ALocal, AVFL, ABVFL or BtoA)");
}

std::string_view SettingName(Setting s) {
  switch (s) {
    case Setting::kALocal:
      return "ALocal";
    case Setting::kAVFL:
      return "AVFL";
    case Setting::kABVFL:
      return "ABVFL";
    case Setting::kBtoA:
      return "BtoA";
  }
  return "?";
}

OracleResult OracleTrain(const protocol::RunConfig& run,
                         const data::TabularDataset& data,
                         const data::DomainSplit& split,
                         const grouping::FeatureGroupSpec& spec,
                         const adversarial::ArchitectureConfig& arch,
                         Setting setting) {
  run.Validate();
  const protocol::Shards shards = protocol::Shards::Build(data, split);
  PlainExchange exchange;
  OracleResult result;
  if (setting != Setting::kALocal) {
    result.c_model = adversarial::PassiveModel::Create(
        spec, data, arch, protocol::ModelSeedsFor(run.seed));
  }
  adversarial::PassiveModel* c = result.c_model ? &*result.c_model : nullptr;

  switch (setting) {
    case Setting::kALocal:
    case Setting::kAVFL: {
      protocol::RunConfig r = run;
      r.freeze_extractors = false;
      result.history = protocol::Finetune(r, data, c, exchange, shards.target_p,
                                          shards.target_c);
      break;
    }
    case Setting::kABVFL: {
      std::vector<std::size_t> rows = split.source;
      rows.insert(rows.end(), split.target_labeled.begin(),
                  split.target_labeled.end());
      const auto view_p =
          data::MakePartyView(data, rows, data::PartyRole::kActive, true);
      const auto view_c =
          data::MakePartyView(data, rows, data::PartyRole::kPassive, false);
      protocol::RunConfig r = run;
      r.domain_adaptation = false;
      result.history = protocol::Pretrain(r, data, c, exchange, view_p, view_c,
                                          shards.target_all_c);
      break;
    }
    case Setting::kBtoA: {
      result.history = protocol::Pretrain(run, data, c, exchange,
                                          shards.source_p, shards.source_c,
                                          shards.target_all_c);
      result.history.Append(protocol::Finetune(run, data, c, exchange,
                                               shards.target_p,
                                               shards.target_c));
      break;
    }
  }
  result.weights = exchange.Weights();
  result.evaluation = protocol::Evaluate(run, data, c, exchange, shards.test_p,
                                         shards.test_c);
  return result;
}

double Tolerance(std::int64_t t, int frac_bits, double c) {
  return static_cast<double>(t) * c * std::ldexp(1.0, -frac_bits);
}

TrajectoryReport CompareTrajectories(const protocol::History& secure,
                                     const protocol::History& plain,
                                     int frac_bits, double c) {
  if (secure.iterations.size() != plain.iterations.size()) {
    throw DimensionError("trajectory length mismatch: " +
                         std::to_string(secure.iterations.size()) + " vs " +
                         std::to_string(plain.iterations.size()));
  }
  TrajectoryReport report;
  report.frac_bits = frac_bits;
  report.constant = c;
  report.iterations = static_cast<std::int64_t>(secure.iterations.size());
  for (std::size_t i = 0; i < secure.iterations.size(); ++i) {
    const auto& s = secure.iterations[i];
    const auto& p = plain.iterations[i];
    if (s.w_c.size() != p.w_c.size() || s.w_p.size() != p.w_p.size() ||
        s.logits.size() != p.logits.size()) {
      throw DimensionError("trajectory shapes differ at iteration " +
                           std::to_string(i) +
                           " (was record_trajectory enabled?)");
    }
    double w = std::abs(s.b - p.b);
    if (s.w_c.size() > 0) w = std::max(w, (s.w_c - p.w_c).cwiseAbs().maxCoeff());
    if (s.w_p.size() > 0) w = std::max(w, (s.w_p - p.w_p).cwiseAbs().maxCoeff());
    double l = 0.0;
    for (std::size_t k = 0; k < s.logits.size(); ++k) {
      l = std::max(l, std::abs(s.logits[k] - p.logits[k]));
    }
    report.max_weight_divergence = std::max(report.max_weight_divergence, w);
    report.max_logit_divergence = std::max(report.max_logit_divergence, l);
    const double d = std::max(w, l);
    report.divergence.push_back(d);
    if (!(d <= Tolerance(i + 1, frac_bits, c)) && !report.first_failure) {
      report.first_failure = static_cast<std::int64_t>(i);
      report.pass = false;
    }
  }
  return report;
}

nlohmann::json TrajectoryReport::ToJson() const {
  return {{"pass", pass},
          {"iterations", iterations},
          {"max_weight_divergence", max_weight_divergence},
          {"max_logit_divergence", max_logit_divergence},
          {"first_failure", first_failure ? nlohmann::json(*first_failure)
                                          : nlohmann::json(nullptr)},
          {"frac_bits", frac_bits},
          {"tolerance_constant", constant},
          {"divergence", divergence}};
}

std::string TrajectoryReport::Summary() const {
  std::ostringstream out;
  out << (pass ? "PASS" : "FAIL") << ": " << iterations
      << " iterations, max weight divergence " << max_weight_divergence
      << ", max logit divergence " << max_logit_divergence
      << " (tol(t) = t * " << constant << " * 2^-" << frac_bits << ")";
  if (first_failure) out << ", first divergent iteration " << *first_failure;
  return out.str();
}

VerifyResult VerifyProtocol(protocol::RunConfig run,
                            const data::TabularDataset& data,
                            const data::DomainSplit& split,
                            const grouping::FeatureGroupSpec& spec,
                            const adversarial::ArchitectureConfig& arch,
                            const phe::Keypair& keys, std::int64_t iterations,
                            double c) {
  if (iterations < 1) throw ConfigError("verify: iterations must be >= 1");
  const protocol::Shards shards = protocol::Shards::Build(data, split);
  const auto per_epoch = static_cast<std::int64_t>(
      (shards.source_p.num_rows() + run.batch_size - 1) / run.batch_size);
  if (per_epoch == 0) throw ConfigError("verify: no source rows");
  run.record_trajectory = true;
  run.max_iterations = iterations;
  run.epochs_pretrain =
      static_cast<int>((iterations + per_epoch - 1) / per_epoch);
  run.Validate();

  using Clock = std::chrono::steady_clock;
  auto seconds = [](Clock::time_point a) {
    return std::chrono::duration<double>(Clock::now() - a).count();
  };
  VerifyResult out;
  {
    auto model = adversarial::PassiveModel::Create(
        spec, data, arch, protocol::ModelSeedsFor(run.seed));
    protocol::SecureExchange exchange(keys, model.g(), run);
    const auto start = Clock::now();
    out.secure = protocol::Pretrain(run, data, &model, exchange, shards.source_p,
                                    shards.source_c, shards.target_all_c);
    out.secure_seconds = seconds(start);
  }
  {
    auto model = adversarial::PassiveModel::Create(
        spec, data, arch, protocol::ModelSeedsFor(run.seed));
    PlainExchange exchange;
    const auto start = Clock::now();
    out.plain = protocol::Pretrain(run, data, &model, exchange, shards.source_p,
                                   shards.source_c, shards.target_all_c);
    out.plain_seconds = seconds(start);
  }
  out.report = CompareTrajectories(out.secure, out.plain, run.frac_bits, c);
  return out;
}

}  // namespace vflda::oracle
