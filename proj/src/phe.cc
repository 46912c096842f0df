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

#include "vflda/phe.h"

#include <cmath>
#include <cstdio>
#include <utility>

#include "vflda/errors.h"

namespace vflda::phe {
namespace {

constexpr int kKeyFormatVersion = 1;

void RequireSameKey(const Ciphertext& a, const Ciphertext& b) {
  if (!a.key || !b.key) throw CryptoError("ciphertext without public key");
  if (a.key != b.key && a.key->n != b.key->n) {
    throw CryptoError("ciphertexts encrypted under different public keys");
  }
}

// Maps a signed mantissa into Z_n.
mpz_class ToResidue(const mpz_class& m, const PublicKey& key) {
  if (abs(m) > key.max_mantissa) {
    throw CryptoError("fixed-point mantissa exceeds the safe plaintext range");
  }
  mpz_class r = m;
  if (r < 0) r += key.n;
  return r;
}

mpz_class FromResidue(const mpz_class& r, const PublicKey& key) {
  if (r <= key.max_mantissa) return r;
  if (r >= key.n - key.max_mantissa) return r - key.n;
  throw CryptoError("overflow detected in decrypted plaintext");
}

mpz_class PowMod(const mpz_class& base, const mpz_class& exp,
                 const mpz_class& mod) {
  mpz_class out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(),
           mod.get_mpz_t());
  return out;
}

mpz_class InvertMod(const mpz_class& a, const mpz_class& mod) {
  mpz_class out;
  if (mpz_invert(out.get_mpz_t(), a.get_mpz_t(), mod.get_mpz_t()) == 0) {
    throw CryptoError("value not invertible modulo n^2");
  }
  return out;
}

mpz_class RandomPrime(int bits, RandomSource& rng) {
  // Top two bits set so that the product of two such primes has exactly
  // 2 * bits bits.
  mpz_class candidate = rng.Bits(bits);
  mpz_setbit(candidate.get_mpz_t(), bits - 1);
  mpz_setbit(candidate.get_mpz_t(), bits - 2);
  mpz_class prime;
  mpz_nextprime(prime.get_mpz_t(), candidate.get_mpz_t());
  return prime;
}

mpz_class ParseBig(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_string()) {
    throw ConfigError(std::string("key file: missing string field '") +
                      field + "'");
  }
  mpz_class v;
  if (v.set_str(j[field].get<std::string>(), 10) != 0) {
    throw ConfigError(std::string("key file: field '") + field +
                      "' is not a decimal integer");
  }
  return v;
}

}  // namespace

RandomSource::RandomSource(std::uint64_t seed) : state_(gmp_randinit_mt) {
  mpz_class s;
  mpz_import(s.get_mpz_t(), 1, 1, sizeof(seed), 0, 0, &seed);
  state_.seed(s);
}

mpz_class RandomSource::Below(const mpz_class& bound) {
  return state_.get_z_range(bound);
}

mpz_class RandomSource::Bits(int bits) { return state_.get_z_bits(bits); }

FixedPoint FixedPoint::Encode(double x, int frac_bits) {
  if (!std::isfinite(x)) {
    throw CryptoError("cannot encode a non-finite value");
  }
  // Scaling by a power of two is exact; nearbyint under the default
  // rounding mode is round-half-even.
  double scaled = std::nearbyint(std::ldexp(x, frac_bits));
  FixedPoint out;
  mpz_set_d(out.mantissa.get_mpz_t(), scaled);
  out.exponent = frac_bits;
  return out;
}

double FixedPoint::Decode() const {
  long exp2 = 0;
  double head = mpz_get_d_2exp(&exp2, mantissa.get_mpz_t());
  return std::ldexp(head, static_cast<int>(exp2) - exponent);
}

FixedPoint FixedPoint::Rescaled(int new_exponent) const {
  if (new_exponent < exponent) {
    throw std::invalid_argument("Rescaled cannot coarsen; use RoundedTo");
  }
  FixedPoint out;
  mpz_mul_2exp(out.mantissa.get_mpz_t(), mantissa.get_mpz_t(),
               new_exponent - exponent);
  out.exponent = new_exponent;
  return out;
}

FixedPoint FixedPoint::RoundedTo(int new_exponent) const {
  if (new_exponent >= exponent) return Rescaled(new_exponent);
  const int shift = exponent - new_exponent;
  mpz_class q, r;
  mpz_fdiv_q_2exp(q.get_mpz_t(), mantissa.get_mpz_t(), shift);
  mpz_fdiv_r_2exp(r.get_mpz_t(), mantissa.get_mpz_t(), shift);
  mpz_class half = mpz_class(1) << (shift - 1);
  if (r > half || (r == half && mpz_odd_p(q.get_mpz_t()))) ++q;
  return FixedPoint{q, new_exponent};
}

FixedPoint operator+(const FixedPoint& a, const FixedPoint& b) {
  const int e = std::max(a.exponent, b.exponent);
  return FixedPoint{a.Rescaled(e).mantissa + b.Rescaled(e).mantissa, e};
}

FixedPoint operator-(const FixedPoint& a, const FixedPoint& b) {
  const int e = std::max(a.exponent, b.exponent);
  return FixedPoint{a.Rescaled(e).mantissa - b.Rescaled(e).mantissa, e};
}

FixedPoint operator*(const FixedPoint& a, const FixedPoint& b) {
  return FixedPoint{a.mantissa * b.mantissa, a.exponent + b.exponent};
}

bool operator==(const FixedPoint& a, const FixedPoint& b) {
  const int e = std::max(a.exponent, b.exponent);
  return a.Rescaled(e).mantissa == b.Rescaled(e).mantissa;
}

std::shared_ptr<const PublicKey> PublicKey::FromModulus(const mpz_class& n,
                                                        int key_bits) {
  auto key = std::make_shared<PublicKey>();
  key->n = n;
  key->n_squared = n * n;
  key->generator = n + 1;
  key->key_bits = key_bits;
  key->max_mantissa = n / 3;
  return key;
}

PrivateKey::PrivateKey(std::shared_ptr<const PublicKey> public_key,
                       mpz_class p, mpz_class q)
    : public_key_(std::move(public_key)), p_(std::move(p)), q_(std::move(q)) {
  if (p_ * q_ != public_key_->n) {
    throw CryptoError("private key factors do not match the modulus");
  }
  p_squared_ = p_ * p_;
  q_squared_ = q_ * q_;
  mpz_class pm1 = p_ - 1, qm1 = q_ - 1;
  mpz_lcm(lambda_.get_mpz_t(), pm1.get_mpz_t(), qm1.get_mpz_t());
  // h_p = L_p(g^(p-1) mod p^2)^-1 mod p, with g = n + 1.
  auto h = [&](const mpz_class& prime, const mpz_class& prime_sq) {
    mpz_class u = PowMod(public_key_->generator, prime - 1, prime_sq);
    mpz_class l = (u - 1) / prime;
    mpz_class inv;
    if (mpz_invert(inv.get_mpz_t(), l.get_mpz_t(), prime.get_mpz_t()) == 0) {
      throw CryptoError("degenerate Paillier key");
    }
    return inv;
  };
  hp_ = h(p_, p_squared_);
  hq_ = h(q_, q_squared_);
  if (mpz_invert(q_inv_mod_p_.get_mpz_t(), q_.get_mpz_t(), p_.get_mpz_t()) ==
      0) {
    throw CryptoError("degenerate Paillier key");
  }
}

Keypair GenerateKeypair(int key_bits, RandomSource& rng) {
  if (key_bits != 512 && key_bits != 1024 && key_bits != 2048) {
    throw ConfigError("key_bits must be one of 512, 1024, 2048 (got " +
                      std::to_string(key_bits) + ")");
  }
  const int half = key_bits / 2;
  mpz_class p = RandomPrime(half, rng);
  mpz_class q = RandomPrime(half, rng);
  while (q == p) q = RandomPrime(half, rng);
  auto pub = PublicKey::FromModulus(p * q, key_bits);
  auto priv = std::make_shared<const PrivateKey>(pub, p, q);
  return Keypair{pub, priv};
}

Keypair GenerateKeypair(int key_bits, std::uint64_t seed) {
  RandomSource rng(seed);
  return GenerateKeypair(key_bits, rng);
}

Encryptor::Encryptor(std::shared_ptr<const PublicKey> key, std::uint64_t seed)
    : key_(std::move(key)), rng_(seed) {}

Ciphertext Encryptor::Encrypt(double x, int frac_bits) {
  return Encrypt(FixedPoint::Encode(x, frac_bits));
}

Ciphertext Encryptor::Encrypt(const FixedPoint& x) {
  const PublicKey& k = *key_;
  const mpz_class m = ToResidue(x.mantissa, k);
  mpz_class r;
  do {
    r = rng_.Below(k.n);
  } while (r == 0 || gcd(r, k.n) != 1);
  // (1 + n)^m = 1 + m n (mod n^2).
  mpz_class gm = (1 + m * k.n) % k.n_squared;
  mpz_class c = (gm * PowMod(r, k.n, k.n_squared)) % k.n_squared;
  return Ciphertext{std::move(c), x.exponent, key_};
}

std::vector<Ciphertext> Encryptor::EncryptAll(std::span<const double> xs,
                                              int frac_bits) {
  std::vector<Ciphertext> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(Encrypt(x, frac_bits));
  return out;
}

Decryptor::Decryptor(std::shared_ptr<const PrivateKey> key)
    : key_(std::move(key)) {}

mpz_class Decryptor::RawDecrypt(const mpz_class& c) const {
  const PrivateKey& k = *key_;
  auto part = [&](const mpz_class& prime, const mpz_class& prime_sq,
                  const mpz_class& h) -> mpz_class {
    mpz_class u = PowMod(c % prime_sq, prime - 1, prime_sq);
    mpz_class l = (u - 1) / prime;
    return (l * h) % prime;
  };
  mpz_class mp = part(k.p_, k.p_squared_, k.hp_);
  mpz_class mq = part(k.q_, k.q_squared_, k.hq_);
  // CRT: m = mq + q * ((mp - mq) * q^-1 mod p).
  mpz_class t = ((mp - mq) * k.q_inv_mod_p_) % k.p_;
  if (t < 0) t += k.p_;
  return mq + k.q_ * t;
}

FixedPoint Decryptor::DecryptFixed(const Ciphertext& c) const {
  const PublicKey& pk = *key_->public_key();
  if (!c.key || c.key->n != pk.n) {
    throw CryptoError("ciphertext was not encrypted under this key");
  }
  if (c.value <= 0 || c.value >= pk.n_squared || gcd(c.value, pk.n) != 1) {
    throw CryptoError("corrupted ciphertext: value outside Z*_{n^2}");
  }
  return FixedPoint{FromResidue(RawDecrypt(c.value), pk), c.exponent};
}

double Decryptor::Decrypt(const Ciphertext& c) const {
  return DecryptFixed(c).Decode();
}

Ciphertext MulInt(const Ciphertext& a, const mpz_class& k) {
  const PublicKey& pk = *a.key;
  mpz_class value;
  if (k >= 0) {
    value = PowMod(a.value, k, pk.n_squared);
  } else {
    value = PowMod(InvertMod(a.value, pk.n_squared), -k, pk.n_squared);
  }
  return Ciphertext{std::move(value), a.exponent, a.key};
}

Ciphertext Rescale(const Ciphertext& a, int new_exponent) {
  if (new_exponent < a.exponent) {
    throw std::invalid_argument("ciphertext rescale cannot coarsen");
  }
  if (new_exponent == a.exponent) return a;
  Ciphertext out = MulInt(a, mpz_class(1) << (new_exponent - a.exponent));
  out.exponent = new_exponent;
  return out;
}

Ciphertext AddCt(const Ciphertext& a, const Ciphertext& b) {
  RequireSameKey(a, b);
  const int e = std::max(a.exponent, b.exponent);
  const Ciphertext ra = Rescale(a, e);
  const Ciphertext rb = Rescale(b, e);
  return Ciphertext{(ra.value * rb.value) % a.key->n_squared, e, a.key};
}

Ciphertext AddPt(const Ciphertext& a, const FixedPoint& x) {
  const PublicKey& pk = *a.key;
  const int e = std::max(a.exponent, x.exponent);
  const Ciphertext ra = Rescale(a, e);
  const mpz_class m = ToResidue(x.Rescaled(e).mantissa, pk);
  mpz_class gm = (1 + m * pk.n) % pk.n_squared;
  return Ciphertext{(ra.value * gm) % pk.n_squared, e, a.key};
}

Ciphertext AddPt(const Ciphertext& a, double x) {
  return AddPt(a, FixedPoint::Encode(x, a.exponent));
}

Ciphertext MulPt(const Ciphertext& a, const FixedPoint& x) {
  const int e = a.exponent + x.exponent;
  if (e > a.key->max_exponent()) {
    throw CryptoError("fixed-point exponent overflow after multiplication (" +
                      std::to_string(e) + " > " +
                      std::to_string(a.key->max_exponent()) + ")");
  }
  if (abs(x.mantissa) > a.key->max_mantissa) {
    throw CryptoError("plaintext multiplier exceeds the safe range");
  }
  Ciphertext out = MulInt(a, x.mantissa);
  out.exponent = e;
  return out;
}

Ciphertext MulPt(const Ciphertext& a, double x, int frac_bits) {
  return MulPt(a, FixedPoint::Encode(x, frac_bits));
}

Ciphertext EncDot(std::span<const Ciphertext> v,
                  std::span<const FixedPoint> w) {
  if (v.size() != w.size()) {
    throw DimensionError("EncDot: length mismatch (" +
                         std::to_string(v.size()) + " vs " +
                         std::to_string(w.size()) + ")");
  }
  if (v.empty()) throw DimensionError("EncDot: empty vectors");
  Ciphertext acc = MulPt(v[0], w[0]);
  for (std::size_t i = 1; i < v.size(); ++i) {
    acc = AddCt(acc, MulPt(v[i], w[i]));
  }
  return acc;
}

Ciphertext EncDot(std::span<const Ciphertext> v, std::span<const double> w,
                  int frac_bits) {
  std::vector<FixedPoint> encoded;
  encoded.reserve(w.size());
  for (double x : w) encoded.push_back(FixedPoint::Encode(x, frac_bits));
  return EncDot(v, encoded);
}

nlohmann::json PublicKeyToJson(const PublicKey& key) {
  return {{"version", kKeyFormatVersion},
          {"key_bits", key.key_bits},
          {"n", key.n.get_str(10)}};
}

std::shared_ptr<const PublicKey> PublicKeyFromJson(const nlohmann::json& j) {
  if (j.value("version", 0) != kKeyFormatVersion) {
    throw ConfigError("key file: unsupported version");
  }
  const int bits = j.value("key_bits", 0);
  mpz_class n = ParseBig(j, "n");
  if (static_cast<int>(mpz_sizeinbase(n.get_mpz_t(), 2)) != bits) {
    throw ConfigError("key file: modulus size does not match key_bits");
  }
  return PublicKey::FromModulus(n, bits);
}

nlohmann::json KeypairToJson(const Keypair& keys) {
  nlohmann::json j = PublicKeyToJson(*keys.public_key);
  j["p"] = keys.private_key->p().get_str(10);
  j["q"] = keys.private_key->q().get_str(10);
  return j;
}

Keypair KeypairFromJson(const nlohmann::json& j) {
  auto pub = PublicKeyFromJson(j);
  try {
    auto priv = std::make_shared<const PrivateKey>(pub, ParseBig(j, "p"),
                                                   ParseBig(j, "q"));
    return Keypair{pub, priv};
  } catch (const CryptoError& e) {
    throw ConfigError(std::string("key file: ") + e.what());
  }
}

std::string Digest(const mpz_class& value) {
  // FNV-1a over the hex representation.
  std::uint64_t h = 1469598103934665603ULL;
  for (char ch : value.get_str(16)) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace vflda::phe
