#include <cmath>

#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "slpstack/distribution.hpp"

using namespace slpstack;

// Reference densities come from Boost.Math, an implementation independent of ours.
TEST(Distribution, ContinuousLogDensitiesMatchReference) {
  const boost::math::normal_distribution<> n(1.5, 0.7);
  const boost::math::gamma_distribution<> g(2.5, 1.0 / 3.0);  // shape, scale
  const boost::math::inverse_gamma_distribution<> ig(3.0, 2.0);
  const boost::math::exponential_distribution<> e(1.7);
  for (double x : {0.1, 0.9, 2.3, 5.0}) {
    EXPECT_NEAR(Distribution::normal(1.5, 0.7).log_density(x), std::log(pdf(n, x)), 1e-12);
    EXPECT_NEAR(Distribution::gamma(2.5, 3.0).log_density(x), std::log(pdf(g, x)), 1e-12);
    EXPECT_NEAR(Distribution::inverse_gamma(3.0, 2.0).log_density(x), std::log(pdf(ig, x)), 1e-12);
    EXPECT_NEAR(Distribution::exponential(1.7).log_density(x), std::log(pdf(e, x)), 1e-12);
  }
  EXPECT_NEAR(Distribution::uniform(-1.0, 3.0).log_density(0.5), -std::log(4.0), 1e-15);
}

TEST(Distribution, OutsideSupportIsNegInf) {
  EXPECT_EQ(Distribution::gamma(1.0, 1.0).log_density(-0.5), kNegInf);
  EXPECT_EQ(Distribution::inverse_gamma(1.0, 1.0).log_density(0.0), kNegInf);
  EXPECT_EQ(Distribution::exponential(2.0).log_density(-1e-9), kNegInf);
  EXPECT_EQ(Distribution::uniform(0.0, 1.0).log_density(1.5), kNegInf);
  EXPECT_EQ(Distribution::bernoulli(0.3).log_density(2.0), kNegInf);
  EXPECT_EQ(Distribution::categorical({0.5, 0.5}).log_density(0.5), kNegInf);
  EXPECT_EQ(Distribution::discrete_uniform(1, 3).log_density(4.0), kNegInf);
}

TEST(Distribution, DiscreteMasses) {
  EXPECT_NEAR(Distribution::bernoulli(0.3).log_density(1.0), std::log(0.3), 1e-15);
  EXPECT_NEAR(Distribution::bernoulli(0.3).log_density(0.0), std::log(0.7), 1e-15);
  EXPECT_NEAR(Distribution::categorical({0.4, 0.4, 0.2}).log_density(2.0), std::log(0.2), 1e-15);
  EXPECT_NEAR(Distribution::discrete_uniform(1, 15).log_density(7.0), -std::log(15.0), 1e-15);
}

TEST(Distribution, SupportInIndexOrder) {
  EXPECT_EQ(Distribution::bernoulli(0.5).support(), (std::vector<std::int64_t>{0, 1}));
  EXPECT_EQ(Distribution::categorical({0.4, 0.4, 0.2}).support(), (std::vector<std::int64_t>{0, 1, 2}));
  EXPECT_EQ(Distribution::discrete_uniform(1, 3).support(), (std::vector<std::int64_t>{1, 2, 3}));
  EXPECT_THROW(Distribution::normal(0.0, 1.0).support(), Error);
}

TEST(Distribution, InvalidParametersRejected) {
  EXPECT_THROW(Distribution::normal(0.0, 0.0), Error);
  EXPECT_THROW(Distribution::gamma(-1.0, 1.0), Error);
  EXPECT_THROW(Distribution::inverse_gamma(1.0, 0.0), Error);
  EXPECT_THROW(Distribution::exponential(0.0), Error);
  EXPECT_THROW(Distribution::uniform(1.0, 1.0), Error);
  EXPECT_THROW(Distribution::bernoulli(1.5), Error);
  EXPECT_THROW(Distribution::categorical({0.5, 0.6}), Error);
  EXPECT_THROW(Distribution::categorical({}), Error);
  EXPECT_THROW(Distribution::discrete_uniform(3, 1), Error);
}

TEST(Distribution, SampleMomentsMatch) {
  Rng rng(11);
  const int n = 200000;
  auto moments = [&](const Distribution& d) {
    double s = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = as_real(d.sample(rng));
      s += x;
      ss += x * x;
    }
    const double m = s / n;
    return std::pair{m, ss / n - m * m};
  };
  auto [gm, gv] = moments(Distribution::gamma(2.0, 4.0));
  EXPECT_NEAR(gm, 0.5, 0.005);
  EXPECT_NEAR(gv, 0.125, 0.005);
  auto [im, iv] = moments(Distribution::inverse_gamma(5.0, 8.0));
  EXPECT_NEAR(im, 2.0, 0.02);
  EXPECT_NEAR(iv, 64.0 / (16.0 * 3.0), 0.05);
  auto [cm, cv] = moments(Distribution::categorical({0.4, 0.4, 0.2}));
  EXPECT_NEAR(cm, 0.8, 0.01);
  EXPECT_NEAR(cv, 0.56, 0.01);
  auto [dm, dv] = moments(Distribution::discrete_uniform(1, 15));
  EXPECT_NEAR(dm, 8.0, 0.05);
  EXPECT_NEAR(dv, (15.0 * 15.0 - 1.0) / 12.0, 0.3);
}

TEST(Distribution, DiscreteSamplesAreIntegers) {
  Rng rng(1);
  EXPECT_TRUE(is_integer(Distribution::bernoulli(0.5).sample(rng)));
  EXPECT_TRUE(is_integer(Distribution::categorical({1.0}).sample(rng)));
  EXPECT_FALSE(is_integer(Distribution::normal(0, 1).sample(rng)));
}
