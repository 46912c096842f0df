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

#include "vflda/protocol.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "vflda/errors.h"
#include "vflda/metrics.h"

namespace vflda::protocol {
namespace {

using nlohmann::json;

template <typename T>
void Read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run.") + key + ": " + e.what());
  }
}

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

json OptionalJson(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

void CheckAligned(const data::PartyView& p, const data::PartyView& c,
                  const char* what) {
  if (p.alignment != c.alignment) {
    throw ProtocolError(std::string("shard misalignment between the active "
                                    "party and C on ") + what);
  }
}

std::vector<int> LabelsAt(const data::PartyView& view,
                          const std::vector<std::size_t>& rows) {
  std::vector<int> y;
  y.reserve(rows.size());
  for (std::size_t r : rows) y.push_back(view.labels.at(r));
  return y;
}

Matrix HighOrderOrEmpty(const adversarial::PassiveModel* c_model,
                        const data::PartyView& view,
                        const std::vector<std::size_t>& rows) {
  if (!c_model) return Matrix(rows.size(), 0);
  return c_model->HighOrder(view, rows);
}

double MeanOf(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

// Shared per-phase loop.
struct LoopSpec {
  std::string phase;
  int epochs = 0;
  double eta = 0.0;
  bool adversarial = false;
  PartyId active = PartyId::kB;
  Stream lr_stream = Stream::kLrInitB;
};

class TrainLoop {
 public:
  TrainLoop(const RunConfig& run, const data::TabularDataset& data,
            adversarial::PassiveModel* c_model, LabelExchange& exchange)
      : run_(run), data_(data), c_model_(c_model), exchange_(exchange) {}

  History Run(const LoopSpec& spec, const data::PartyView& view_p,
              const data::PartyView& view_c, const data::PartyView* target_c,
              const data::PartyView* val_p, const data::PartyView* val_c) {
    run_.Validate();
    CheckAligned(view_p, view_c, spec.phase.c_str());
    if (view_p.labels.size() != view_p.num_rows()) {
      throw ProtocolError("active party view carries no labels");
    }
    const int g = c_model_ ? c_model_->g() : 0;
    const int m = ActiveWidth(data_, view_p);
    exchange_.Connect(spec.active, secure_lr::InitLRWeights(
                                       g, m, StreamSeed(run_.seed, spec.lr_stream)));
    History history;
    if (spec.epochs == 0 || view_p.num_rows() == 0) return history;
    if (spec.adversarial && (!target_c || target_c->num_rows() == 0)) {
      throw ProtocolError("domain adaptation needs unlabeled target rows at C");
    }

    // Separate streams keep a lambda = 0 run identical to a no-DA run.
    std::mt19937_64 shuffle_rng(StreamSeed(run_.seed, Stream::kShuffle) ^
                                (spec.phase == "pretrain" ? 0 : 0x5a5a5a5aULL));
    std::mt19937_64 target_rng(StreamSeed(run_.seed, Stream::kTargetSampling));
    std::vector<std::size_t> order(view_p.num_rows());
    std::iota(order.begin(), order.end(), 0);
    Shuffle(order, shuffle_rng);

    std::int64_t iteration = 0;
    double best_val = std::numeric_limits<double>::infinity();
    int stale = 0;
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
      if (epoch > 0 && run_.reshuffle) Shuffle(order, shuffle_rng);
      EpochRecord summary;
      summary.phase = spec.phase;
      summary.epoch = epoch;
      std::vector<double> losses, adv_losses;
      std::vector<std::vector<double>> accs;
      bool capped = false;
      for (std::size_t start = 0; start < order.size();
           start += run_.batch_size) {
        if (run_.max_iterations >= 0 && iteration >= run_.max_iterations) {
          capped = true;
          break;
        }
        const std::size_t end =
            std::min(order.size(), start + static_cast<std::size_t>(run_.batch_size));
        const std::vector<std::size_t> rows(order.begin() + start,
                                            order.begin() + end);
        IterationRecord rec;
        rec.phase = spec.phase;
        rec.epoch = epoch;
        rec.iteration = iteration;

        if (spec.adversarial && c_model_) {
          std::uniform_int_distribution<std::size_t> pick(
              0, target_c->num_rows() - 1);
          std::vector<std::size_t> trows(rows.size());
          for (auto& r : trows) r = pick(target_rng);
          const adversarial::AdvStepResult adv = c_model_->AdversarialStep(
              view_c, rows, *target_c, trows, LambdaAt(iteration), spec.eta);
          rec.loss_adv = adv.loss;
          rec.group_accuracy = adv.group_accuracy;
          adv_losses.push_back(adv.loss);
          accs.push_back(adv.group_accuracy);
        }

        const Matrix x_p = ActiveDesign(data_, view_p, rows);
        const std::vector<int> y = LabelsAt(view_p, rows);
        LabelExchange::Step step;
        if (c_model_) {
          const adversarial::HighOrderPass pass = c_model_->Forward(view_c, rows);
          step = exchange_.TrainStep(pass.mu, x_p, y, spec.eta);
          // Mean loss: C scales the per-sample delta^C by 1/B.
          c_model_->Backprop(pass, step.delta_c / static_cast<double>(rows.size()),
                             spec.eta);
        } else {
          step = exchange_.TrainStep(Matrix(rows.size(), 0), x_p, y, spec.eta);
        }
        if (!std::isfinite(step.loss)) {
          throw NumericError(spec.phase + ": non-finite label loss at iteration " +
                             std::to_string(iteration));
        }
        rec.loss_ce = step.loss;
        losses.push_back(step.loss);
        if (run_.record_trajectory) {
          const secure_lr::LRWeights w = exchange_.Weights();
          rec.logits = step.logits;
          rec.w_c = w.w_c;
          rec.w_p = w.w_p;
          rec.b = w.b;
        }
        history.iterations.push_back(std::move(rec));
        ++iteration;
      }
      if (losses.empty()) break;
      summary.loss_ce = MeanOf(losses);
      if (!adv_losses.empty()) summary.loss_adv = MeanOf(adv_losses);
      if (!accs.empty()) {
        summary.group_accuracy.assign(accs.front().size(), 0.0);
        for (const auto& a : accs) {
          for (std::size_t i = 0; i < a.size(); ++i) {
            summary.group_accuracy[i] += a[i] / accs.size();
          }
        }
      }
      bool stop = capped;
      if (val_p && val_c && val_p->num_rows() > 0) {
        const double v = ValidationLoss(*val_p, *val_c);
        summary.validation_loss = v;
        if (run_.patience > 0) {
          if (v < best_val) {
            best_val = v;
            stale = 0;
          } else if (++stale >= run_.patience) {
            stop = true;
          }
        }
      }
      history.epochs.push_back(std::move(summary));
      if (stop) break;
    }
    return history;
  }

 private:
  double LambdaAt(std::int64_t iteration) const {
    if (run_.lambda_warmup <= 0) return run_.lambda;
    const double ramp = static_cast<double>(iteration + 1) / run_.lambda_warmup;
    return run_.lambda * std::min(1.0, ramp);
  }

  static void Shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> d(0, i - 1);
      std::swap(v[i - 1], v[d(rng)]);
    }
  }

  double ValidationLoss(const data::PartyView& val_p,
                        const data::PartyView& val_c) {
    CheckAligned(val_p, val_c, "validation");
    double total = 0.0;
    for (std::size_t start = 0; start < val_p.num_rows();
         start += run_.batch_size) {
      const std::size_t end = std::min(val_p.num_rows(),
                                       start + static_cast<std::size_t>(run_.batch_size));
      std::vector<std::size_t> rows(end - start);
      std::iota(rows.begin(), rows.end(), start);
      const std::vector<double> p = exchange_.Predict(
          HighOrderOrEmpty(c_model_, val_c, rows), ActiveDesign(data_, val_p, rows));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        total += nn::Bce(p[i], val_p.labels[rows[i]]).loss;
      }
    }
    return total / val_p.num_rows();
  }

  RunConfig run_;
  const data::TabularDataset& data_;
  adversarial::PassiveModel* c_model_;
  LabelExchange& exchange_;
};

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

RunConfig RunConfig::FromJson(const json& j) {
  if (!j.is_object()) throw ConfigError("run: expected an object");
  RunConfig r;
  Read(j, "epochs_pretrain", r.epochs_pretrain);
  Read(j, "epochs_finetune", r.epochs_finetune);
  Read(j, "batch_size", r.batch_size);
  Read(j, "eta_pretrain", r.eta_pretrain);
  Read(j, "eta_finetune", r.eta_finetune);
  Read(j, "lambda", r.lambda);
  Read(j, "lambda_warmup", r.lambda_warmup);
  Read(j, "domain_adaptation", r.domain_adaptation);
  Read(j, "seed", r.seed);
  Read(j, "key_bits", r.key_bits);
  Read(j, "frac_bits", r.frac_bits);
  Read(j, "noise_bits", r.noise_bits);
  Read(j, "max_iterations", r.max_iterations);
  Read(j, "reshuffle", r.reshuffle);
  Read(j, "freeze_extractors", r.freeze_extractors);
  Read(j, "patience", r.patience);
  Read(j, "log_interval", r.log_interval);
  Read(j, "record_trajectory", r.record_trajectory);
  if (j.contains("scheduler")) {
    r.scheduler = ParseScheduler(j.at("scheduler").get<std::string>());
  }
  r.Validate();
  return r;
}

json RunConfig::ToJson() const {
  return {{"epochs_pretrain", epochs_pretrain},
          {"epochs_finetune", epochs_finetune},
          {"batch_size", batch_size},
          {"eta_pretrain", eta_pretrain},
          {"eta_finetune", eta_finetune},
          {"lambda", lambda},
          {"lambda_warmup", lambda_warmup},
          {"domain_adaptation", domain_adaptation},
          {"seed", seed},
          {"key_bits", key_bits},
          {"frac_bits", frac_bits},
          {"noise_bits", noise_bits},
          {"max_iterations", max_iterations},
          {"reshuffle", reshuffle},
          {"freeze_extractors", freeze_extractors},
          {"patience", patience},
          {"log_interval", log_interval},
          {"record_trajectory", record_trajectory},
          {"scheduler", scheduler == SchedulerKind::kSequential ? "sequential"
                                                                 : "threaded"}};
}

void RunConfig::Validate() const {
  if (epochs_pretrain < 0) throw ConfigError("run.epochs_pretrain must be >= 0");
  if (epochs_finetune < 0) throw ConfigError("run.epochs_finetune must be >= 0");
  if (batch_size < 1) throw ConfigError("run.batch_size must be >= 1");
  if (!(eta_pretrain > 0)) throw ConfigError("run.eta_pretrain must be > 0");
  if (!(eta_finetune > 0)) throw ConfigError("run.eta_finetune must be > 0");
  if (!(lambda >= 0) || !std::isfinite(lambda)) {
    throw ConfigError("run.lambda must be finite and >= 0");
  }
  if (key_bits != 512 && key_bits != 1024 && key_bits != 2048) {
    throw ConfigError("run.key_bits must be 512, 1024 or 2048");
  }
  if (frac_bits < 8 || 3 * frac_bits > key_bits / 3) {
    throw ConfigError("run.frac_bits must be >= 8 and leave room for three "
                      "fixed-point scales in the key");
  }
  if (noise_bits < 1 || noise_bits > 128) {
    throw ConfigError("run.noise_bits must be in [1, 128]");
  }
  if (lambda_warmup < 0) throw ConfigError("run.lambda_warmup must be >= 0");
  if (log_interval < 1) throw ConfigError("run.log_interval must be >= 1");
  if (patience < 0) throw ConfigError("run.patience must be >= 0");
}

std::uint64_t StreamSeed(std::uint64_t seed, Stream stream) {
  return SplitMix64(SplitMix64(seed) ^ static_cast<std::uint64_t>(stream));
}

adversarial::ModelSeeds ModelSeedsFor(std::uint64_t seed) {
  return {StreamSeed(seed, Stream::kExtractors),
          StreamSeed(seed, Stream::kDiscriminators),
          StreamSeed(seed, Stream::kAggregators),
          StreamSeed(seed, Stream::kEmbeddings)};
}

// ---------------------------------------------------------------------------
// History

void History::Append(const History& other) {
  iterations.insert(iterations.end(), other.iterations.begin(),
                    other.iterations.end());
  epochs.insert(epochs.end(), other.epochs.begin(), other.epochs.end());
}

std::vector<json> History::ToJsonLines(int log_interval) const {
  std::vector<json> lines;
  for (const auto& it : iterations) {
    if (it.iteration % log_interval != 0) continue;
    json j = {{"type", "iteration"},
              {"phase", it.phase},
              {"epoch", it.epoch},
              {"iteration", it.iteration},
              {"loss_ce", it.loss_ce},
              {"loss_adv", OptionalJson(it.loss_adv)},
              {"group_accuracy", it.group_accuracy}};
    lines.push_back(std::move(j));
  }
  for (const auto& e : epochs) {
    lines.push_back({{"type", "epoch"},
                     {"phase", e.phase},
                     {"epoch", e.epoch},
                     {"loss_ce", e.loss_ce},
                     {"loss_adv", OptionalJson(e.loss_adv)},
                     {"group_accuracy", e.group_accuracy},
                     {"validation_loss", OptionalJson(e.validation_loss)}});
  }
  return lines;
}

// ---------------------------------------------------------------------------
// SecureExchange

SecureExchange::SecureExchange(phe::Keypair keys, int g, const RunConfig& run,
                               bool keep_payloads)
    : keys_(std::move(keys)), run_(run), bus_(keep_payloads) {
  run_.Validate();
  if (keys_.key_bits() != run_.key_bits) {
    throw ConfigError("key pair has " + std::to_string(keys_.key_bits()) +
                      " bits but run.key_bits is " +
                      std::to_string(run_.key_bits));
  }
  passive_ = std::make_unique<secure_lr::PassiveParty>(
      keys_, g, StreamSeed(run_.seed, Stream::kEncrypt),
      StreamSeed(run_.seed, Stream::kNoiseC), run_.mask());
}

void SecureExchange::Connect(PartyId active, const secure_lr::LRWeights& init) {
  const Stream noise = active == PartyId::kA ? Stream::kNoiseA : Stream::kNoiseB;
  // The active party only ever receives the public key.
  actives_[active] = std::make_unique<secure_lr::ActiveParty>(
      active, keys_.public_key, secure_lr::MakeSplitState(init, run_.mask()),
      StreamSeed(run_.seed, noise), run_.mask());
  passive_->Connect(active);
  current_ = active;
}

void SecureExchange::Restore(PartyId active,
                             const secure_lr::SplitLRState& state,
                             const secure_lr::NoiseState& noise) {
  const Stream stream = active == PartyId::kA ? Stream::kNoiseA : Stream::kNoiseB;
  if (state.w_tilde_c.size() != noise.eps.size()) {
    throw DimensionError("restored active state and C's mask differ in g");
  }
  if (state.t != noise.t) {
    throw ProtocolError("restored states disagree on the iteration counter");
  }
  actives_[active] = std::make_unique<secure_lr::ActiveParty>(
      active, keys_.public_key, state,
      StreamSeed(run_.seed, stream) ^ static_cast<std::uint64_t>(state.t),
      run_.mask());
  passive_->Connect(active);
  passive_->mutable_noise() = noise;
  current_ = active;
}

secure_lr::ActiveParty& SecureExchange::active() {
  auto it = actives_.find(current_);
  if (it == actives_.end()) throw ProtocolError("no active party connected");
  return *it->second;
}

secure_lr::Channel SecureExchange::channel() {
  return {&active(), passive_.get(), &bus_, run_.scheduler};
}

LabelExchange::Step SecureExchange::TrainStep(const Matrix& mu,
                                              const Matrix& x_p,
                                              const std::vector<int>& labels,
                                              double eta) {
  secure_lr::Channel ch = channel();
  secure_lr::ForwardResult fwd;
  Step step;
  step.delta_c =
      RunAlgorithm3(ch, next_round_++, mu, x_p, labels, eta, &fwd);
  step.loss = fwd.loss;
  step.logits = std::move(fwd.logits);
  return step;
}

std::vector<double> SecureExchange::Predict(const Matrix& mu, const Matrix& x_p) {
  secure_lr::Channel ch = channel();
  return secure_lr::SecurePredict(ch, next_round_++, mu, x_p);
}

secure_lr::LRWeights SecureExchange::Weights() const {
  auto it = actives_.find(current_);
  if (it == actives_.end()) throw ProtocolError("no active party connected");
  const secure_lr::SplitLRState& s = it->second->state();
  return {secure_lr::Reconstruct(s, passive_->noise()), s.w_p, s.b};
}

std::int64_t SecureExchange::iteration() const {
  return passive_->noise().t;
}

Matrix RunAlgorithm3(secure_lr::Channel& ch, std::int64_t round_id,
                     const Matrix& mu, const Matrix& x_p,
                     const std::vector<int>& labels, double eta,
                     secure_lr::ForwardResult* forward) {
  if (labels.empty()) throw DimensionError("training round without labels");
  secure_lr::ForwardResult fwd =
      secure_lr::SecureForward(ch, round_id, mu, x_p, labels);
  Matrix delta_c = secure_lr::SecureBackward(ch, eta);
  if (forward) *forward = std::move(fwd);
  return delta_c;
}

// ---------------------------------------------------------------------------
// Shards and loops

Shards Shards::Build(const data::TabularDataset& data,
                     const data::DomainSplit& split) {
  using data::MakePartyView;
  using data::PartyRole;
  Shards s;
  s.source_p = MakePartyView(data, split.source, PartyRole::kActive, true);
  s.source_c = MakePartyView(data, split.source, PartyRole::kPassive, false);
  s.target_p = MakePartyView(data, split.target_labeled, PartyRole::kActive, true);
  s.target_c =
      MakePartyView(data, split.target_labeled, PartyRole::kPassive, false);
  s.target_all_c =
      MakePartyView(data, split.TargetAll(), PartyRole::kPassive, false);
  s.test_p = MakePartyView(data, split.target_test, PartyRole::kActive, true);
  s.test_c = MakePartyView(data, split.target_test, PartyRole::kPassive, false);
  return s;
}

int ActiveWidth(const data::TabularDataset& data, const data::PartyView& view) {
  int width = 0;
  for (int c : view.columns) {
    const auto& col = data.columns.at(c);
    width += col.kind == data::ColumnKind::kNumeric
                 ? 1
                 : static_cast<int>(col.vocab.size());
  }
  return width;
}

Matrix ActiveDesign(const data::TabularDataset& data,
                    const data::PartyView& view,
                    const std::vector<std::size_t>& rows) {
  Matrix x = Matrix::Zero(rows.size(), ActiveWidth(data, view));
  int offset = 0;
  for (std::size_t k = 0; k < view.columns.size(); ++k) {
    const auto& col = data.columns.at(view.columns[k]);
    if (col.kind == data::ColumnKind::kNumeric) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        x(i, offset) = view.numeric[k].at(rows[i]);
      }
      offset += 1;
    } else {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        x(i, offset + view.codes[k].at(rows[i])) = 1.0;
      }
      offset += static_cast<int>(col.vocab.size());
    }
  }
  return x;
}

History Pretrain(const RunConfig& run, const data::TabularDataset& data,
                 adversarial::PassiveModel* c_model, LabelExchange& exchange,
                 const data::PartyView& source_p,
                 const data::PartyView& source_c,
                 const data::PartyView& target_c) {
  if (c_model) c_model->set_freeze_extractors(false);
  LoopSpec spec{"pretrain", run.epochs_pretrain, run.eta_pretrain,
                run.domain_adaptation, PartyId::kB, Stream::kLrInitB};
  return TrainLoop(run, data, c_model, exchange)
      .Run(spec, source_p, source_c, &target_c, nullptr, nullptr);
}

History Finetune(const RunConfig& run, const data::TabularDataset& data,
                 adversarial::PassiveModel* c_model, LabelExchange& exchange,
                 const data::PartyView& target_p,
                 const data::PartyView& target_c,
                 const data::PartyView* validation_p,
                 const data::PartyView* validation_c) {
  if (c_model) c_model->set_freeze_extractors(run.freeze_extractors);
  LoopSpec spec{"finetune", run.epochs_finetune, run.eta_finetune, false,
                PartyId::kA, Stream::kLrInitA};
  History h = TrainLoop(run, data, c_model, exchange)
                  .Run(spec, target_p, target_c, nullptr, validation_p,
                       validation_c);
  if (c_model) c_model->set_freeze_extractors(false);
  return h;
}

Evaluation Evaluate(const RunConfig& run, const data::TabularDataset& data,
                    const adversarial::PassiveModel* c_model,
                    LabelExchange& exchange, const data::PartyView& test_p,
                    const data::PartyView& test_c) {
  CheckAligned(test_p, test_c, "evaluation");
  if (test_p.num_rows() == 0) throw ConfigError("empty test set");
  Evaluation ev;
  ev.labels = test_p.labels;
  for (std::size_t start = 0; start < test_p.num_rows();
       start += run.batch_size) {
    const std::size_t end = std::min(test_p.num_rows(),
                                     start + static_cast<std::size_t>(run.batch_size));
    std::vector<std::size_t> rows(end - start);
    std::iota(rows.begin(), rows.end(), start);
    const std::vector<double> p = exchange.Predict(
        HighOrderOrEmpty(c_model, test_c, rows), ActiveDesign(data, test_p, rows));
    ev.predictions.insert(ev.predictions.end(), p.begin(), p.end());
  }
  ev.auc = metrics::Auc(ev.predictions, ev.labels);
  ev.ks = metrics::Ks(ev.predictions, ev.labels);
  return ev;
}

}  // namespace vflda::protocol
