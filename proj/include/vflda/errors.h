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

#ifndef VFLDA_ERRORS_H_
#define VFLDA_ERRORS_H_

#include <stdexcept>
#include <string>

namespace vflda {

// Bad configuration, malformed input files, unknown columns. The CLI maps
// this family to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or dimension disagreement between collaborating objects.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failures of the cryptographic layer: key mismatch, corrupted ciphertexts,
// plaintext-space overflow.
class CryptoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Protocol faults: out-of-order or malformed messages, iteration desync.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite losses or parameters during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vflda

#endif  // VFLDA_ERRORS_H_
