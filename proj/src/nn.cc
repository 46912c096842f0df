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

#include "vflda/nn.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <regex>

#include "vflda/errors.h"

namespace vflda::nn {
namespace {

constexpr int kCheckpointVersion = 1;
constexpr char kBase64Chars[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string Base64Encode(const std::vector<unsigned char>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kBase64Chars[(v >> 18) & 63];
    out += kBase64Chars[(v >> 12) & 63];
    out += kBase64Chars[(v >> 6) & 63];
    out += kBase64Chars[v & 63];
  }
  if (i < bytes.size()) {
    unsigned v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    out += kBase64Chars[(v >> 18) & 63];
    out += kBase64Chars[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kBase64Chars[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<unsigned char> Base64Decode(std::string_view s) {
  auto index = [](char c) -> int {
    const char* p = std::strchr(kBase64Chars, c);
    if (c == '\0' || p == nullptr) throw ConfigError("invalid base64 data");
    return static_cast<int>(p - kBase64Chars);
  };
  if (s.size() % 4 != 0) throw ConfigError("invalid base64 length");
  std::vector<unsigned char> out;
  for (std::size_t i = 0; i < s.size(); i += 4) {
    unsigned v = (index(s[i]) << 18) | (index(s[i + 1]) << 12);
    out.push_back((v >> 16) & 255);
    if (s[i + 2] == '=') break;
    v |= index(s[i + 2]) << 6;
    out.push_back((v >> 8) & 255);
    if (s[i + 3] == '=') break;
    v |= index(s[i + 3]);
    out.push_back(v & 255);
  }
  return out;
}

double Activate(Activation a, double x) {
  switch (a) {
    case Activation::kIdentity:
      return x;
    case Activation::kLeakyRelu:
      return x > 0 ? x : kLeakySlope * x;
    case Activation::kSigmoid:
      return Sigmoid(x);
  }
  return x;
}

// Derivative expressed through the activation output.
double ActivationSlope(Activation a, double out) {
  switch (a) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kLeakyRelu:
      return out > 0 ? 1.0 : kLeakySlope;
    case Activation::kSigmoid:
      return out * (1.0 - out);
  }
  return 1.0;
}

void RequireFinite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericError(std::string("non-finite values in ") + what);
  }
}

}  // namespace

std::string_view ActivationName(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kLeakyRelu:
      return "leaky_relu";
    case Activation::kSigmoid:
      return "sigmoid";
  }
  return "identity";
}

Activation ParseActivation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

DenseGrads DenseGrads::ZerosLike(const DenseNet& net) {
  DenseGrads g;
  for (const auto& layer : net.layers()) {
    g.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                        Vector::Zero(layer.bias.size())});
  }
  return g;
}

DenseGrads& DenseGrads::operator+=(const DenseGrads& other) {
  if (other.layers.size() != layers.size()) {
    throw DimensionError("gradient shapes differ");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

DenseGrads& DenseGrads::operator*=(double s) {
  for (auto& l : layers) {
    l.weight *= s;
    l.bias *= s;
  }
  return *this;
}

bool DenseGrads::IsZero() const {
  return std::all_of(layers.begin(), layers.end(), [](const LayerGrads& l) {
    return l.weight.isZero(0.0) && l.bias.isZero(0.0);
  });
}

DenseNet::DenseNet(std::vector<DenseLayer> layers)
    : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].bias.size() != layers_[i].weight.rows()) {
      throw DimensionError("layer " + std::to_string(i) +
                           ": bias length does not match output dim");
    }
    if (i > 0 && layers_[i].in_dim() != layers_[i - 1].out_dim()) {
      throw DimensionError("layer " + std::to_string(i) +
                           ": input dim does not chain with previous layer");
    }
  }
}

DenseNet DenseNet::Create(std::span<const int> dims, Activation hidden,
                          Activation output, Rng& rng) {
  if (dims.size() < 2) throw DimensionError("network needs at least 2 dims");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const int in = dims[i], out = dims[i + 1];
    if (in <= 0 || out <= 0) throw DimensionError("non-positive layer dim");
    const double limit = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer;
    layer.weight.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    layer.bias = Vector::Zero(out);
    layer.activation = (i + 2 == dims.size()) ? output : hidden;
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

int DenseNet::in_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

int DenseNet::out_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

std::vector<DenseLayer>& DenseNet::mutable_layers() {
  ++version_;
  return layers_;
}

Matrix DenseNet::Forward(const Matrix& x, Tape* tape) const {
  if (x.cols() != in_dim()) {
    throw DimensionError("forward: input has " + std::to_string(x.cols()) +
                         " columns, network expects " +
                         std::to_string(in_dim()));
  }
  if (tape != nullptr) {
    tape->owner = this;
    tape->version = version_;
    tape->inputs.clear();
    tape->activations.clear();
  }
  Matrix cur = x;
  for (const auto& layer : layers_) {
    Matrix pre = cur * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    Matrix out = pre.unaryExpr(
        [a = layer.activation](double v) { return Activate(a, v); });
    if (tape != nullptr) {
      tape->inputs.push_back(std::move(cur));
      tape->activations.push_back(out);
    }
    cur = std::move(out);
  }
  return cur;
}

Matrix DenseNet::Backward(const Tape& tape, const Matrix& upstream,
                          DenseGrads* grads) const {
  if (tape.owner != this || tape.version != version_ ||
      tape.inputs.size() != layers_.size()) {
    throw std::logic_error("backward: tape does not belong to this network "
                           "state (stale or mismatched)");
  }
  if (upstream.cols() != out_dim() ||
      upstream.rows() != tape.activations.back().rows()) {
    throw DimensionError("backward: upstream gradient shape mismatch");
  }
  if (grads != nullptr && grads->layers.size() != layers_.size()) {
    *grads = DenseGrads::ZerosLike(*this);
  }
  Matrix g = upstream;
  for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
    const DenseLayer& layer = layers_[i];
    const Matrix& out = tape.activations[i];
    Matrix dpre = g.binaryExpr(out, [a = layer.activation](double u, double o) {
      return u * ActivationSlope(a, o);
    });
    if (grads != nullptr) {
      grads->layers[i].weight.noalias() += dpre.transpose() * tape.inputs[i];
      grads->layers[i].bias += dpre.colwise().sum().transpose();
    }
    g = dpre * layer.weight;
  }
  return g;
}

void DenseNet::SgdStep(const DenseGrads& grads, double eta) {
  if (!(eta > 0)) throw std::invalid_argument("learning rate must be > 0");
  if (grads.layers.size() != layers_.size()) {
    throw DimensionError("sgd: gradient/parameter layer count mismatch");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& layer = layers_[i];
    const auto& g = grads.layers[i];
    if (g.weight.rows() != layer.weight.rows() ||
        g.weight.cols() != layer.weight.cols() ||
        g.bias.size() != layer.bias.size()) {
      throw DimensionError("sgd: gradient shape mismatch at layer " +
                           std::to_string(i));
    }
    layer.weight -= eta * g.weight;
    layer.bias -= eta * g.bias;
    RequireFinite(layer.weight, "network weights after SGD step");
    if (!layer.bias.allFinite()) {
      throw NumericError("non-finite values in network bias after SGD step");
    }
  }
  ++version_;
}

std::size_t DenseNet::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

std::vector<double> DenseNet::FlatParameters() const {
  std::vector<double> out;
  out.reserve(ParameterCount());
  for (const auto& l : layers_) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

bool operator==(const DenseNet& a, const DenseNet& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const auto& x = a.layers_[i];
    const auto& y = b.layers_[i];
    if (x.activation != y.activation || x.weight.rows() != y.weight.rows() ||
        x.weight.cols() != y.weight.cols() || x.weight != y.weight ||
        x.bias != y.bias) {
      return false;
    }
  }
  return true;
}

Matrix GrlBackward(const Matrix& upstream, double lambda) {
  return -lambda * upstream;
}

BceResult Bce(double p_hat, int y) {
  const double p = std::clamp(p_hat, kProbClamp, 1.0 - kProbClamp);
  const double loss = y == 1 ? -std::log(p) : -std::log(1.0 - p);
  return {loss, p_hat - y};
}

BceResult BceFromLogit(double logit, int y) {
  return Bce(Sigmoid(logit), y);
}

EmbeddingTable::EmbeddingTable(int vocab, int dim, Rng& rng) {
  if (vocab <= 0 || dim <= 0) {
    throw DimensionError("embedding vocab and dim must be positive");
  }
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(dim));
  table_.resize(vocab, dim);
  for (int r = 0; r < vocab; ++r)
    for (int c = 0; c < dim; ++c) table_(r, c) = dist(rng);
}

EmbeddingTable::EmbeddingTable(Matrix table) : table_(std::move(table)) {}

Matrix EmbeddingTable::Lookup(std::span<const int> codes) const {
  Matrix out(codes.size(), dim());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] < 0 || codes[i] >= vocab()) {
      throw DimensionError("embedding index " + std::to_string(codes[i]) +
                           " outside vocabulary of size " +
                           std::to_string(vocab()));
    }
    out.row(i) = table_.row(codes[i]);
  }
  return out;
}

void EmbeddingTable::AccumulateGrad(std::span<const int> codes,
                                    const Matrix& upstream,
                                    Matrix* grad) const {
  if (grad->rows() != table_.rows() || grad->cols() != table_.cols()) {
    grad->setZero(table_.rows(), table_.cols());
  }
  if (upstream.rows() != static_cast<Eigen::Index>(codes.size()) ||
      upstream.cols() != dim()) {
    throw DimensionError("embedding gradient shape mismatch");
  }
  for (std::size_t i = 0; i < codes.size(); ++i) {
    grad->row(codes[i]) += upstream.row(i);
  }
}

void EmbeddingTable::SgdStep(const Matrix& grad, double eta) {
  if (!(eta > 0)) throw std::invalid_argument("learning rate must be > 0");
  if (grad.rows() != table_.rows() || grad.cols() != table_.cols()) {
    throw DimensionError("embedding sgd: gradient shape mismatch");
  }
  table_ -= eta * grad;
  RequireFinite(table_, "embedding table after SGD step");
}

int DefaultEmbeddingDim(int vocab) {
  return std::min(8, (vocab + 1) / 2);
}

std::vector<int> ParseArchitecture(std::string_view spec) {
  std::string s(spec);
  // Normalise the unicode arrow to "->".
  for (std::size_t pos; (pos = s.find("\xE2\x86\x92")) != std::string::npos;) {
    s.replace(pos, 3, "->");
  }
  static const std::regex kLayer(R"(\s*FC\(\s*(\d+)\s*->\s*(\d+)\s*\)\s*)");
  std::vector<int> dims;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find('-', start);
    // A '-' that begins "->" belongs to the arrow.
    while (end != std::string::npos && end + 1 < s.size() && s[end + 1] == '>')
      end = s.find('-', end + 2);
    std::string token = s.substr(start, end == std::string::npos
                                            ? std::string::npos
                                            : end - start);
    std::smatch m;
    if (!std::regex_match(token, m, kLayer)) {
      throw ConfigError("malformed architecture segment '" + token +
                        "' in '" + std::string(spec) + "'");
    }
    const int in = std::stoi(m[1]), out = std::stoi(m[2]);
    if (dims.empty()) {
      dims.push_back(in);
    } else if (dims.back() != in) {
      throw ConfigError("architecture '" + std::string(spec) +
                        "' does not chain: " + std::to_string(dims.back()) +
                        " then " + std::to_string(in));
    }
    dims.push_back(out);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return dims;
}

std::string FormatArchitecture(std::span<const int> dims) {
  std::string out;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (i > 0) out += "-";
    out += "FC(" + std::to_string(dims[i]) + "->" +
           std::to_string(dims[i + 1]) + ")";
  }
  return out;
}

nlohmann::json MatrixToJson(const Matrix& m, bool binary) {
  nlohmann::json j = {{"rows", m.rows()}, {"cols", m.cols()}};
  if (binary) {
    std::vector<unsigned char> bytes(m.size() * sizeof(double));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(m.data()[i]);
      for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = (bits >> (8 * b)) & 255;
    }
    j["data_b64"] = Base64Encode(bytes);
  } else {
    j["data"] = std::vector<double>(m.data(), m.data() + m.size());
  }
  return j;
}

Matrix MatrixFromJson(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  Matrix m(rows, cols);
  if (j.contains("data_b64")) {
    auto bytes = Base64Decode(j["data_b64"].get<std::string>());
    if (bytes.size() != static_cast<std::size_t>(m.size()) * 8) {
      throw ConfigError("checkpoint: binary array size mismatch");
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
      m.data()[i] = std::bit_cast<double>(bits);
    }
  } else {
    auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != static_cast<std::size_t>(m.size())) {
      throw ConfigError("checkpoint: array size mismatch");
    }
    std::copy(data.begin(), data.end(), m.data());
  }
  return m;
}

nlohmann::json NetToJson(const DenseNet& net, bool binary) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    Matrix bias = l.bias.transpose();
    layers.push_back({{"activation", ActivationName(l.activation)},
                      {"weight", MatrixToJson(l.weight, binary)},
                      {"bias", MatrixToJson(bias, binary)}});
  }
  return {{"version", kCheckpointVersion}, {"layers", layers}};
}

DenseNet NetFromJson(const nlohmann::json& j) {
  if (j.value("version", 0) != kCheckpointVersion) {
    throw ConfigError("checkpoint: unsupported network format version");
  }
  std::vector<DenseLayer> layers;
  for (const auto& lj : j.at("layers")) {
    DenseLayer l;
    l.activation = ParseActivation(lj.at("activation").get<std::string>());
    l.weight = MatrixFromJson(lj.at("weight"));
    Matrix bias = MatrixFromJson(lj.at("bias"));
    l.bias = Eigen::Map<const Vector>(bias.data(), bias.size());
    layers.push_back(std::move(l));
  }
  return DenseNet(std::move(layers));
}

}  // namespace vflda::nn
