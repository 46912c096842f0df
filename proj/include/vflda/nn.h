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

// Small dense-network kernel with hand-written backpropagation: fully
// connected layers, leaky-ReLU/sigmoid activations, categorical embeddings,
// gradient reversal and plain SGD. Batches are row-major (one sample per row).

#ifndef VFLDA_NN_H_
#define VFLDA_NN_H_

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace vflda::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kProbClamp = 1e-12;

enum class Activation { kIdentity, kLeakyRelu, kSigmoid };

std::string_view ActivationName(Activation a);
Activation ParseActivation(std::string_view name);

double Sigmoid(double z);

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::kIdentity;

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
};

class DenseNet;

// Activations recorded by a forward pass; consumed by Backward on the same,
// unmodified network.
struct Tape {
  const DenseNet* owner = nullptr;
  std::uint64_t version = 0;
  std::vector<Matrix> inputs;       // per layer
  std::vector<Matrix> activations;  // post-activation outputs per layer
};

struct LayerGrads {
  Matrix weight;
  Vector bias;
};

struct DenseGrads {
  std::vector<LayerGrads> layers;

  static DenseGrads ZerosLike(const DenseNet& net);
  DenseGrads& operator+=(const DenseGrads& other);
  DenseGrads& operator*=(double s);
  bool IsZero() const;
};

class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers);

  // dims = {in, h1, ..., out}. Hidden layers use `hidden`, the last layer
  // uses `output`. Weights are He-uniform scaled by fan-in, biases zero.
  static DenseNet Create(std::span<const int> dims, Activation hidden,
                         Activation output, Rng& rng);

  int in_dim() const;
  int out_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers();
  std::uint64_t version() const { return version_; }

  Matrix Forward(const Matrix& x, Tape* tape = nullptr) const;
  // Accumulates parameter gradients into `grads` (if non-null) and returns
  // d loss / d input.
  Matrix Backward(const Tape& tape, const Matrix& upstream,
                  DenseGrads* grads) const;

  // p <- p - eta * g. Throws NumericError if any parameter becomes
  // non-finite.
  void SgdStep(const DenseGrads& grads, double eta);

  std::size_t ParameterCount() const;
  // Flat view in layer order: weight (row-major), then bias.
  std::vector<double> FlatParameters() const;

  friend bool operator==(const DenseNet& a, const DenseNet& b);

 private:
  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

// Gradient reversal: identity forward, -lambda * upstream backward.
inline const Matrix& GrlForward(const Matrix& x) { return x; }
Matrix GrlBackward(const Matrix& upstream, double lambda);

struct BceResult {
  double loss;
  double dloss_dlogit;
};

// Binary cross-entropy of p_hat (clamped to [1e-12, 1 - 1e-12]) against
// y in {0, 1}; the gradient is with respect to the pre-sigmoid logit.
BceResult Bce(double p_hat, int y);
BceResult BceFromLogit(double logit, int y);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(int vocab, int dim, Rng& rng);
  explicit EmbeddingTable(Matrix table);

  int vocab() const { return static_cast<int>(table_.rows()); }
  int dim() const { return static_cast<int>(table_.cols()); }
  const Matrix& table() const { return table_; }

  Matrix Lookup(std::span<const int> codes) const;
  // grad += scatter of upstream rows into the looked-up indices.
  void AccumulateGrad(std::span<const int> codes, const Matrix& upstream,
                      Matrix* grad) const;
  void SgdStep(const Matrix& grad, double eta);

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.table_ == b.table_;
  }

 private:
  Matrix table_;
};

// Default embedding width for a vocabulary: min(8, ceil(vocab / 2)).
int DefaultEmbeddingDim(int vocab);

// Parses "FC(28->56)-FC(56->28)-FC(28->14)" (ASCII arrow or U+2192) into the
// chained dimension list {28, 56, 28, 14}.
std::vector<int> ParseArchitecture(std::string_view spec);
std::string FormatArchitecture(std::span<const int> dims);

// Checkpoint encoding: shapes plus flat parameter arrays. In binary mode
// arrays are base64 of little-endian float64.
nlohmann::json NetToJson(const DenseNet& net, bool binary = false);
DenseNet NetFromJson(const nlohmann::json& j);
nlohmann::json MatrixToJson(const Matrix& m, bool binary = false);
Matrix MatrixFromJson(const nlohmann::json& j);

}  // namespace vflda::nn

#endif  // VFLDA_NN_H_
