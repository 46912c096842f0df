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

// Paillier additively homomorphic encryption over fixed-point encoded reals.
//
// Plaintexts live in Z_n. A real x is carried as a FixedPoint whose integer
// mantissa equals x * 2^exponent; negative mantissas wrap into the upper half
// of Z_n. Ciphertexts remember the exponent of the plaintext they encrypt so
// that homomorphic operations can keep the scales aligned exactly.

#ifndef VFLDA_PHE_H_
#define VFLDA_PHE_H_

#include <gmpxx.h>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace vflda::phe {

inline constexpr int kDefaultFracBits = 40;

// Seedable randomness shared by key generation and encryption nonces.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed);

  // Uniform integer in [0, bound).
  mpz_class Below(const mpz_class& bound);
  // Uniform integer with exactly `bits` random bits (top bit may be zero).
  mpz_class Bits(int bits);

 private:
  gmp_randclass state_;
};

// value = mantissa * 2^-exponent.
struct FixedPoint {
  mpz_class mantissa;
  int exponent = 0;

  // Round-half-even encoding of x on the 2^-frac_bits grid.
  static FixedPoint Encode(double x, int frac_bits = kDefaultFracBits);
  double Decode() const;
  // Exact rescale to a finer grid; `exponent` must not decrease.
  FixedPoint Rescaled(int new_exponent) const;
  // Round-half-even rescale to a coarser (or equal) grid.
  FixedPoint RoundedTo(int new_exponent) const;

  friend FixedPoint operator+(const FixedPoint& a, const FixedPoint& b);
  friend FixedPoint operator-(const FixedPoint& a, const FixedPoint& b);
  friend FixedPoint operator*(const FixedPoint& a, const FixedPoint& b);
  friend bool operator==(const FixedPoint& a, const FixedPoint& b);
};

struct PublicKey {
  mpz_class n;
  mpz_class n_squared;
  mpz_class generator;  // n + 1
  int key_bits = 0;

  // Largest magnitude a decrypted mantissa may have before it is treated
  // as an overflow (n / 3).
  mpz_class max_mantissa;
  // Ciphertext exponents above this are rejected by MulPt.
  int max_exponent() const { return key_bits / 3; }

  static std::shared_ptr<const PublicKey> FromModulus(const mpz_class& n,
                                                      int key_bits);
};

class PrivateKey {
 public:
  PrivateKey(std::shared_ptr<const PublicKey> public_key, mpz_class p,
             mpz_class q);

  const std::shared_ptr<const PublicKey>& public_key() const {
    return public_key_;
  }
  const mpz_class& p() const { return p_; }
  const mpz_class& q() const { return q_; }
  const mpz_class& lambda() const { return lambda_; }

 private:
  friend class Decryptor;
  std::shared_ptr<const PublicKey> public_key_;
  mpz_class p_, q_;
  mpz_class p_squared_, q_squared_;
  mpz_class lambda_;
  mpz_class hp_, hq_;      // CRT decryption constants
  mpz_class q_inv_mod_p_;  // for recombination
};

struct Keypair {
  std::shared_ptr<const PublicKey> public_key;
  std::shared_ptr<const PrivateKey> private_key;
  int key_bits() const { return public_key->key_bits; }
};

struct Ciphertext {
  mpz_class value;  // element of Z_{n^2}
  int exponent = 0;
  std::shared_ptr<const PublicKey> key;
};

// key_bits must be 512 (tests only), 1024 or 2048.
Keypair GenerateKeypair(int key_bits, RandomSource& rng);
Keypair GenerateKeypair(int key_bits, std::uint64_t seed);

// Encryption needs fresh nonces, so it owns a random source; keep one
// Encryptor per thread of control.
class Encryptor {
 public:
  Encryptor(std::shared_ptr<const PublicKey> key, std::uint64_t seed);

  Ciphertext Encrypt(double x, int frac_bits = kDefaultFracBits);
  Ciphertext Encrypt(const FixedPoint& x);
  std::vector<Ciphertext> EncryptAll(std::span<const double> xs,
                                     int frac_bits = kDefaultFracBits);

  const std::shared_ptr<const PublicKey>& key() const { return key_; }

 private:
  std::shared_ptr<const PublicKey> key_;
  RandomSource rng_;
};

class Decryptor {
 public:
  explicit Decryptor(std::shared_ptr<const PrivateKey> key);

  double Decrypt(const Ciphertext& c) const;
  FixedPoint DecryptFixed(const Ciphertext& c) const;

  const PrivateKey& key() const { return *key_; }

 private:
  mpz_class RawDecrypt(const mpz_class& c) const;
  std::shared_ptr<const PrivateKey> key_;
};

// Homomorphic operations. Exponents are aligned internally by rescaling the
// coarser operand; operands must share a public key.
Ciphertext AddCt(const Ciphertext& a, const Ciphertext& b);
Ciphertext AddPt(const Ciphertext& a, const FixedPoint& x);
Ciphertext AddPt(const Ciphertext& a, double x);
Ciphertext MulPt(const Ciphertext& a, const FixedPoint& x);
Ciphertext MulPt(const Ciphertext& a, double x,
                 int frac_bits = kDefaultFracBits);
// Multiplies by an integer without changing the exponent.
Ciphertext MulInt(const Ciphertext& a, const mpz_class& k);
Ciphertext Rescale(const Ciphertext& a, int new_exponent);

// Ciphertext of sum_i v_i * w_i.
Ciphertext EncDot(std::span<const Ciphertext> v,
                  std::span<const FixedPoint> w);
Ciphertext EncDot(std::span<const Ciphertext> v, std::span<const double> w,
                  int frac_bits = kDefaultFracBits);

// Versioned JSON, big integers as decimal strings.
nlohmann::json PublicKeyToJson(const PublicKey& key);
std::shared_ptr<const PublicKey> PublicKeyFromJson(const nlohmann::json& j);
nlohmann::json KeypairToJson(const Keypair& keys);
Keypair KeypairFromJson(const nlohmann::json& j);

// Short stable fingerprint of a ciphertext value, used for transcripts.
std::string Digest(const mpz_class& value);

}  // namespace vflda::phe

#endif  // VFLDA_PHE_H_
