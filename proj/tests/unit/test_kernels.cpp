#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "obfuslab/kernels.hpp"

using namespace obfuslab::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("dense forward matches a hand computation") {
  // 1 x 2 input, 2 x 2 weights
  const std::vector<double> w{1.0, 2.0, -1.0, 0.5};
  const std::vector<double> b{0.1, -0.2};
  const std::vector<double> x{3.0, 4.0};
  std::vector<double> y(2);
  serial::dense_forward({1, 2, 2}, w, b, x, y);
  CHECK(y[0] == doctest::Approx(11.1));
  CHECK(y[1] == doctest::Approx(-1.2));
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
  std::mt19937_64 rng(11);
  // Second shape crosses the parallel threshold.
  for (DenseShape shape : {DenseShape{3, 5, 4}, DenseShape{256, 64, 64}, DenseShape{17, 130, 33}}) {
    const auto w = random_values(shape.out * shape.in, rng);
    const auto b = random_values(shape.out, rng);
    const auto x = random_values(shape.batch * shape.in, rng);
    const auto g = random_values(shape.batch * shape.out, rng);

    std::vector<double> ys(shape.batch * shape.out), yp(ys.size());
    serial::dense_forward(shape, w, b, x, ys);
    parallel::dense_forward(shape, w, b, x, yp);
    CHECK(ys == yp);

    std::vector<double> gws(w.size(), 0.0), gwp(w.size(), 0.0);
    std::vector<double> gbs(b.size(), 0.0), gbp(b.size(), 0.0);
    std::vector<double> gis(x.size()), gip(x.size());
    serial::dense_backward(shape, w, x, g, gws, gbs, gis);
    parallel::dense_backward(shape, w, x, g, gwp, gbp, gip);
    CHECK(gws == gwp);
    CHECK(gbs == gbp);
    CHECK(gis == gip);

    auto ts = ys, tp = yp;
    serial::tanh_inplace(ts);
    parallel::tanh_inplace(tp);
    CHECK(ts == tp);
    auto ds = g, dp = g;
    serial::tanh_backward_inplace(ts, ds);
    parallel::tanh_backward_inplace(tp, dp);
    CHECK(ds == dp);
  }
}

TEST_CASE("dense backward accumulates into parameter gradients") {
  const std::vector<double> w{1.0, 2.0};
  const std::vector<double> x{3.0, 4.0};
  const std::vector<double> g{0.5};
  std::vector<double> gw{1.0, 1.0}, gb{1.0};
  serial::dense_backward({1, 2, 1}, w, x, g, gw, gb, {});
  CHECK(gw[0] == doctest::Approx(2.5));
  CHECK(gw[1] == doctest::Approx(3.0));
  CHECK(gb[0] == doctest::Approx(1.5));
}

TEST_CASE("tanh backward multiplies by one minus the square") {
  std::vector<double> a{0.5, -0.25};
  std::vector<double> g{2.0, 4.0};
  serial::tanh_backward_inplace(a, g);
  CHECK(g[0] == doctest::Approx(1.5));
  CHECK(g[1] == doctest::Approx(3.75));
}

}
