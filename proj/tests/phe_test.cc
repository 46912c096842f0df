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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "test_util.h"
#include "vflda/errors.h"

namespace vflda::phe {
namespace {

using ::vflda::testing::TestKeys;

constexpr double kQuantum = 1.0 / (1ULL << 40);

class PheTest : public ::testing::Test {
 protected:
  PheTest()
      : enc_(TestKeys().public_key, 99), dec_(TestKeys().private_key) {}
  Encryptor enc_;
  Decryptor dec_;
};

TEST(KeygenTest, ModulusHasRequestedBits) {
  for (int bits : {512, 1024}) {
    Keypair k = GenerateKeypair(bits, 5);
    EXPECT_EQ(mpz_sizeinbase(k.public_key->n.get_mpz_t(), 2), bits);
    EXPECT_EQ(k.private_key->p() * k.private_key->q(), k.public_key->n);
  }
}

TEST(KeygenTest, SameSeedSameKeys) {
  Keypair a = GenerateKeypair(512, 42);
  Keypair b = GenerateKeypair(512, 42);
  Keypair c = GenerateKeypair(512, 43);
  EXPECT_EQ(a.public_key->n, b.public_key->n);
  EXPECT_EQ(a.private_key->p(), b.private_key->p());
  EXPECT_NE(a.public_key->n, c.public_key->n);
}

TEST(KeygenTest, RejectsUnsupportedSizes) {
  EXPECT_THROW(GenerateKeypair(256, 1), ConfigError);
  EXPECT_THROW(GenerateKeypair(768, 1), ConfigError);
}

TEST(KeygenTest, RoundTrip1024) {
  Keypair k = GenerateKeypair(1024, 7);
  Encryptor e(k.public_key, 1);
  Decryptor d(k.private_key);
  EXPECT_EQ(d.Decrypt(e.Encrypt(7.0)), 7.0);
}

TEST_F(PheTest, EncryptZeroAndFraction) {
  EXPECT_EQ(dec_.Decrypt(enc_.Encrypt(0.0)), 0.0);
  EXPECT_NEAR(dec_.Decrypt(enc_.Encrypt(1.5)), 1.5, kQuantum);
  EXPECT_NEAR(dec_.Decrypt(enc_.Encrypt(-3.25)), -3.25, kQuantum);
}

TEST_F(PheTest, EncryptionIsProbabilistic) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng);
    Ciphertext a = enc_.Encrypt(x), b = enc_.Encrypt(x);
    EXPECT_NE(a.value, b.value);
    EXPECT_EQ(dec_.Decrypt(a), dec_.Decrypt(b));
  }
}

TEST_F(PheTest, AdditiveHomomorphismRandomized) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng);
    const double got = dec_.Decrypt(AddCt(enc_.Encrypt(a), enc_.Encrypt(b)));
    const double bound =
        2 * kQuantum * std::max({1.0, std::abs(a), std::abs(b)});
    ASSERT_LE(std::abs(got - (a + b)), bound) << a << " + " << b;
  }
}

TEST_F(PheTest, ScalarHomomorphismRandomized) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), x = u(rng);
    const double got = dec_.Decrypt(MulPt(enc_.Encrypt(a), x));
    const double bound = kQuantum * (std::abs(a) + std::abs(x) + 1);
    ASSERT_LE(std::abs(got - a * x), bound) << a << " * " << x;
  }
}

TEST_F(PheTest, SmallIdentities) {
  EXPECT_EQ(dec_.Decrypt(AddPt(enc_.Encrypt(0.0), 5.0)), 5.0);
  EXPECT_EQ(dec_.Decrypt(MulPt(enc_.Encrypt(1.75), 0.0)), 0.0);
  EXPECT_EQ(dec_.Decrypt(MulPt(enc_.Encrypt(2.0), 3.0)), 6.0);
  EXPECT_EQ(dec_.Decrypt(MulPt(enc_.Encrypt(2.0), -3.0)), -6.0);
}

TEST_F(PheTest, DotProductChainLength8) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 5);
  Ciphertext acc;
  double expected = 0;
  for (int i = 0; i < 8; ++i) {
    const double v = u(rng), w = u(rng);
    expected += v * w;
    Ciphertext term = MulPt(enc_.Encrypt(v), w);
    acc = i == 0 ? term : AddCt(acc, term);
  }
  EXPECT_NEAR(dec_.Decrypt(acc), expected, 8 * kQuantum * 11);
}

TEST_F(PheTest, EncDotExamples) {
  std::vector<Ciphertext> v = enc_.EncryptAll(std::vector<double>{1, 0});
  EXPECT_EQ(dec_.Decrypt(EncDot(v, std::vector<double>{0, 1})), 0.0);
  std::vector<Ciphertext> ones = enc_.EncryptAll(std::vector<double>{1, 1, 1});
  EXPECT_EQ(dec_.Decrypt(EncDot(ones, std::vector<double>{2, 3, 4})), 9.0);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::vector<double> a(10), b(10);
  double expected = 0;
  for (int i = 0; i < 10; ++i) {
    a[i] = n(rng);
    b[i] = n(rng);
    expected += a[i] * b[i];
  }
  EXPECT_NEAR(dec_.Decrypt(EncDot(enc_.EncryptAll(a), b)), expected,
              10 * kQuantum * 10);
}

TEST_F(PheTest, EncDotRejectsBadLengths) {
  std::vector<Ciphertext> v = enc_.EncryptAll(std::vector<double>{1, 2});
  EXPECT_THROW(EncDot(v, std::vector<double>{1}), DimensionError);
  EXPECT_THROW(EncDot(std::vector<Ciphertext>{}, std::vector<double>{}),
               DimensionError);
}

TEST_F(PheTest, NoCiphertextCollisions) {
  std::set<mpz_class> seen;
  Ciphertext c;
  for (int i = 0; i < 10000; ++i) {
    c = enc_.Encrypt(static_cast<double>(i % 3));
    seen.insert(c.value);
  }
  EXPECT_EQ(seen.size(), 10000u);
}

TEST_F(PheTest, MaskUnmaskIsExact) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int i = 0; i < 200; ++i) {
    const FixedPoint a = FixedPoint::Encode(u(rng));
    FixedPoint eps{mpz_class(static_cast<long>(rng() >> 1)), 40};
    if (i % 2) eps.mantissa = -eps.mantissa;
    const FixedPoint masked = dec_.DecryptFixed(AddPt(enc_.Encrypt(a), eps));
    EXPECT_EQ((masked - eps).mantissa, a.mantissa);
  }
}

TEST_F(PheTest, WrongKeyRejected) {
  Keypair other = GenerateKeypair(512, 77);
  Encryptor e2(other.public_key, 1);
  EXPECT_THROW(dec_.Decrypt(e2.Encrypt(1.0)), CryptoError);
  EXPECT_THROW(AddCt(enc_.Encrypt(1.0), e2.Encrypt(1.0)), CryptoError);
}

TEST_F(PheTest, CorruptedCiphertextRejected) {
  Ciphertext c = enc_.Encrypt(1.0);
  c.value = TestKeys().public_key->n_squared + 5;
  EXPECT_THROW(dec_.Decrypt(c), CryptoError);
  c.value = 0;
  EXPECT_THROW(dec_.Decrypt(c), CryptoError);
}

TEST_F(PheTest, OverflowDetected) {
  const mpz_class& limit = TestKeys().public_key->max_mantissa;
  EXPECT_THROW(enc_.Encrypt(FixedPoint{limit + 1, 0}), CryptoError);
  // Two in-range halves whose sum leaves the safe window.
  Ciphertext big = enc_.Encrypt(FixedPoint{limit, 0});
  EXPECT_THROW(dec_.Decrypt(AddCt(big, big)), CryptoError);
  // Exponent budget exhausted by repeated multiplication.
  Ciphertext c = enc_.Encrypt(1.0);
  EXPECT_THROW(
      {
        for (int i = 0; i < 10; ++i) c = MulPt(c, 1.0);
      },
      CryptoError);
}

TEST(FixedPointTest, RoundHalfEven) {
  EXPECT_EQ(FixedPoint::Encode(2.5, 0).mantissa, 2);
  EXPECT_EQ(FixedPoint::Encode(3.5, 0).mantissa, 4);
  EXPECT_EQ(FixedPoint::Encode(-2.5, 0).mantissa, -2);
  EXPECT_EQ((FixedPoint{5, 1}.RoundedTo(0)).mantissa, 2);
  EXPECT_EQ((FixedPoint{7, 1}.RoundedTo(0)).mantissa, 4);
  EXPECT_EQ((FixedPoint{-5, 1}.RoundedTo(0)).mantissa, -2);
}

TEST(FixedPointTest, ArithmeticAlignsExponents) {
  FixedPoint a = FixedPoint::Encode(1.25, 4);
  FixedPoint b = FixedPoint::Encode(0.5, 10);
  EXPECT_EQ((a + b).exponent, 10);
  EXPECT_EQ((a + b).Decode(), 1.75);
  EXPECT_EQ((a * b).exponent, 14);
  EXPECT_EQ((a * b).Decode(), 0.625);
  EXPECT_THROW(a.Rescaled(2), std::invalid_argument);
}

TEST(KeyJsonTest, RoundTrip) {
  const Keypair& k = TestKeys();
  nlohmann::json j = KeypairToJson(k);
  EXPECT_EQ(j["version"], 1);
  EXPECT_TRUE(j["n"].is_string());
  Keypair back = KeypairFromJson(j);
  EXPECT_EQ(back.public_key->n, k.public_key->n);
  Encryptor e(back.public_key, 3);
  Decryptor d(k.private_key);
  EXPECT_EQ(d.Decrypt(e.Encrypt(4.5)), 4.5);
  auto pub = PublicKeyFromJson(PublicKeyToJson(*k.public_key));
  EXPECT_EQ(pub->n, k.public_key->n);
  nlohmann::json bad = j;
  bad["version"] = 99;
  EXPECT_THROW(KeypairFromJson(bad), ConfigError);
}

}  // namespace
}  // namespace vflda::phe
