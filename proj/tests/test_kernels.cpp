#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace addtree;
using doctest::Approx;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), x.data());
  return x;
}

// Scalar closed forms written out independently of the library.
double se_ref(double r) { return std::exp(-0.5 * r * r); }
double m32_ref(double r) { return (1 + std::sqrt(3.0) * r) * std::exp(-std::sqrt(3.0) * r); }
double m52_ref(double r) { return (1 + std::sqrt(5.0) * r + 5.0 * r * r / 3.0) * std::exp(-std::sqrt(5.0) * r); }

// Brute force: every vertex of the tree, delta times base kernel.
double brute(const AddTreeKernel& k, const LinearizedPoint& x, const LinearizedPoint& y) {
  const auto& sp = k.space();
  double s = 0.0;
  for (int v = 0; v < sp.spec.size(); ++v) {
    if (!delta_eval(sp.index, v, x, y)) continue;
    if (sp.spec.vertex(v).dim == 0 && k.zero_dim_policy() == ZeroDimPolicy::Ignore) continue;
    s += base_kernel_eval(k.params(v), *restrict_to(sp.index, x, v), *restrict_to(sp.index, y, v));
  }
  return s;
}

}  // namespace

TEST_CASE("base kernels against scalar closed forms") {
  const auto se = BaseKernelParams::isotropic(KernelKind::SquaredExponential, 1, 1.0);
  CHECK(base_kernel_eval(se, vec({0.3}), vec({0.3})) == 1.0);
  CHECK(base_kernel_eval(se, vec({0.0}), vec({2.0})) == Approx(0.135335283236613).epsilon(1e-12));
  const auto m52 = BaseKernelParams::isotropic(KernelKind::Matern52, 1, 1.0);
  CHECK(base_kernel_eval(m52, vec({0.0}), vec({0.0})) == 1.0);

  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const double l0 = rng.uniform(0.2, 3), l1 = rng.uniform(0.2, 3), sc = rng.uniform(0.1, 4);
    const Eigen::VectorXd a = vec({rng.uniform(-2, 2), rng.uniform(-2, 2)});
    const Eigen::VectorXd b = vec({rng.uniform(-2, 2), rng.uniform(-2, 2)});
    const double r = std::hypot((a[0] - b[0]) / l0, (a[1] - b[1]) / l1);
    BaseKernelParams p{KernelKind::SquaredExponential, vec({l0, l1}), sc};
    CHECK(base_kernel_eval(p, a, b) == Approx(sc * se_ref(r)).epsilon(1e-13));
    p.kind = KernelKind::Matern32;
    CHECK(base_kernel_eval(p, a, b) == Approx(sc * m32_ref(r)).epsilon(1e-13));
    p.kind = KernelKind::Matern52;
    CHECK(base_kernel_eval(p, a, b) == Approx(sc * m52_ref(r)).epsilon(1e-13));
    const double c = base_kernel_eval(p, a, b) / sc;
    CHECK(c > 0.0);
    CHECK(c <= 1.0);
  }
}

TEST_CASE("base kernel input gradient matches finite differences") {
  Rng rng(4);
  for (KernelKind kind : {KernelKind::SquaredExponential, KernelKind::Matern32, KernelKind::Matern52}) {
    BaseKernelParams p{kind, vec({0.7, 1.3}), 1.7};
    const Eigen::VectorXd a = vec({0.3, -0.4}), b = vec({-0.2, 0.5});
    const Eigen::VectorXd g = base_kernel_input_gradient(p, a, b);
    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd ap = a, am = a;
      ap[j] += 1e-6;
      am[j] -= 1e-6;
      const double fd = (base_kernel_eval(p, ap, b) - base_kernel_eval(p, am, b)) / 2e-6;
      CHECK(g[j] == Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("base kernel errors and degenerate cases") {
  const auto p = BaseKernelParams::isotropic(KernelKind::SquaredExponential, 2, 1.0);
  CHECK_THROWS_AS(base_kernel_eval(p, vec({0.0}), vec({0.0})), std::invalid_argument);
  BaseKernelParams zero{KernelKind::Matern32, Eigen::VectorXd(0), 2.5};
  CHECK(base_kernel_eval(zero, Eigen::VectorXd(0), Eigen::VectorXd(0)) == 2.5);
  BaseKernelParams bad = p;
  bad.lengthscales[0] = -1;
  CHECK_THROWS(bad.validate());
  bad = p;
  bad.output_scale = 0;
  CHECK_THROWS(bad.validate());
  CHECK(kernel_kind_from_string(to_string(KernelKind::Matern32)) == KernelKind::Matern32);
  CHECK_THROWS(kernel_kind_from_string("rbf?"));
}

TEST_CASE("delta on the two-leaf tree") {
  const auto space = make_space(bench::fig1_spec());
  const auto a = linearize(*space, 0, vec({0.1, 0.2, 0.3, 0.4}));
  const auto b = linearize(*space, 1, vec({0.5, 0.6, 0.7, 0.8, 0.9}));
  CHECK(delta_eval(space->index, 0, a, b) == 1);
  CHECK(delta_eval(space->index, 1, a, b) == 0);
  CHECK(delta_eval(space->index, 2, a, b) == 0);
  CHECK(delta_eval(space->index, 1, a, a) == 1);
  CHECK(delta_eval(space->index, 2, a, a) == 0);
}

TEST_CASE("add-tree sum over the lca path") {
  const auto space = make_space(bench::fig1_spec());
  Rng rng(9);
  const AddTreeKernel k(space, testing::random_params(space->spec, rng));
  const auto a = testing::random_point_on(*space, rng, 0);
  const auto a2 = testing::random_point_on(*space, rng, 0);
  const auto b = testing::random_point_on(*space, rng, 1);
  auto r = [&](const LinearizedPoint& p, int v) { return *restrict_to(space->index, p, v); };
  CHECK(k(a, a2) == Approx(base_kernel_eval(k.params(0), r(a, 0), r(a2, 0)) +
                           base_kernel_eval(k.params(1), r(a, 1), r(a2, 1)))
                        .epsilon(1e-14));
  CHECK(k(a, b) == Approx(base_kernel_eval(k.params(0), r(a, 0), r(b, 0))).epsilon(1e-14));
  CHECK(k(a, b) == k(b, a));

  const AddTreeKernel unit = AddTreeKernel::uniform(space, KernelKind::Matern52, 0.8);
  CHECK(unit(a, a) == Approx(2.0));
  CHECK(unit(b, b) == Approx(2.0));
  const Eigen::MatrixXd g1 = gram(unit, {b});
  CHECK(g1(0, 0) == Approx(2.0));
}

TEST_CASE("zero-dim policies") {
  const auto space = make_space(bench::jenatton_spec());
  Rng rng(1);
  const auto a = testing::random_point_on(*space, rng, 0);
  const auto b = testing::random_point_on(*space, rng, 3);
  const AddTreeKernel c = AddTreeKernel::uniform(space, KernelKind::SquaredExponential, 1.0, 1.5);
  const AddTreeKernel i =
      AddTreeKernel::uniform(space, KernelKind::SquaredExponential, 1.0, 1.5, ZeroDimPolicy::Ignore);
  CHECK(c(a, b) == Approx(1.5));
  CHECK(i(a, b) == 0.0);
  CHECK(c(a, a) == Approx(4.5));
  CHECK(i(a, a) == Approx(3.0));
  CHECK(c.leaves_interact(0, 3));
  CHECK(!i.leaves_interact(0, 3));
  CHECK(i.leaves_interact(0, 1));
  CHECK(!i.contributes(0));
  CHECK(c.contributes(0));
}

TEST_CASE("brute-force oracle, symmetry and stationarity on random trees") {
  Rng rng(21);
  for (int rep = 0; rep < 40; ++rep) {
    const auto space = make_space(testing::random_spec(rng));
    const auto policy = rep % 2 ? ZeroDimPolicy::Ignore : ZeroDimPolicy::Constant;
    const AddTreeKernel k(space, testing::random_params(space->spec, rng), policy);
    const auto pts = testing::random_points(*space, rng, 12);
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = 0; j < pts.size(); ++j) {
        CHECK(k(pts[i], pts[j]) == brute(k, pts[i], pts[j]));
        CHECK(k(pts[i], pts[j]) == k(pts[j], pts[i]));
      }
    // translate one vertex's restrictions by the same shift
    for (int v = 0; v < space->spec.size(); ++v) {
      const int dim = space->spec.vertex(v).dim;
      if (dim == 0) continue;
      const Eigen::VectorXd shift = Eigen::VectorXd::Constant(dim, 0.37);
      const Eigen::VectorXd a = Eigen::VectorXd::Constant(dim, 0.1), b = Eigen::VectorXd::Constant(dim, -0.6);
      CHECK(base_kernel_eval(k.params(v), a, b) ==
            Approx(base_kernel_eval(k.params(v), Eigen::VectorXd(a + shift), Eigen::VectorXd(b + shift)))
                .epsilon(1e-13));
    }
  }
}

TEST_CASE("gram matches the root block plus leaf blocks") {
  const auto space = make_space(bench::fig1_spec());
  Rng rng(17);
  const AddTreeKernel k(space, testing::random_params(space->spec, rng));
  std::vector<LinearizedPoint> pts;
  for (int i = 0; i < 3; ++i) pts.push_back(testing::random_point_on(*space, rng, 0));
  for (int i = 0; i < 2; ++i) pts.push_back(testing::random_point_on(*space, rng, 1));
  const Eigen::MatrixXd K = gram(k, pts);
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const Eigen::VectorXd ri = pts[static_cast<std::size_t>(i)].slots.segment(1, 2);
      const Eigen::VectorXd rj = pts[static_cast<std::size_t>(j)].slots.segment(1, 2);
      expect(i, j) = base_kernel_eval(k.params(0), ri, rj);
      if (i < 3 && j < 3)
        expect(i, j) += base_kernel_eval(k.params(1), Eigen::VectorXd(pts[static_cast<std::size_t>(i)].slots.segment(4, 2)),
                                         Eigen::VectorXd(pts[static_cast<std::size_t>(j)].slots.segment(4, 2)));
      if (i >= 3 && j >= 3)
        expect(i, j) += base_kernel_eval(k.params(2), Eigen::VectorXd(pts[static_cast<std::size_t>(i)].slots.segment(7, 3)),
                                         Eigen::VectorXd(pts[static_cast<std::size_t>(j)].slots.segment(7, 3)));
    }
  CHECK((K - expect).cwiseAbs().maxCoeff() <= 1e-12 * expect.cwiseAbs().maxCoeff());
  const Eigen::MatrixXd C = cross_gram(k, pts, {pts[4]});
  CHECK((C.col(0) - K.col(4)).norm() == Approx(0.0));
  CHECK((cross_covariance(k, pts, pts[1]) - K.col(1)).norm() == Approx(0.0));
}

TEST_CASE("gram is psd on random trees") {
  Rng rng(33);
  for (int rep = 0; rep < 30; ++rep) {
    const auto space = make_space(testing::random_spec(rng, 3, 3, 2));
    const AddTreeKernel k(space, testing::random_params(space->spec, rng));
    const Eigen::MatrixXd K = gram(k, testing::random_points(*space, rng, 50));
    CHECK(testing::min_max_eig_ratio(K) >= -1e-8);
    CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("gram gradients match finite differences in log space") {
  Rng rng(8);
  for (int rep = 0; rep < 5; ++rep) {
    const auto space = make_space(testing::random_spec(rng, 3, 2, 2, true));
    AddTreeKernel k(space, testing::random_params(space->spec, rng), ZeroDimPolicy::Constant, rep % 2 == 1);
    const auto pts = testing::random_points(*space, rng, 8);
    const auto grads = gram_gradients(k, pts);
    const Eigen::VectorXd theta = k.log_params();
    REQUIRE(static_cast<int>(grads.size()) == theta.size());
    Eigen::MatrixXd W = Eigen::MatrixXd::Random(8, 8);
    W = (W + W.transpose()).eval();
    const Eigen::VectorXd contracted = contract_gram_gradients(k, pts, W);
    for (int p = 0; p < theta.size(); ++p) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[p] += 1e-6;
      tm[p] -= 1e-6;
      AddTreeKernel kp = k, km = k;
      kp.set_log_params(tp);
      km.set_log_params(tm);
      const Eigen::MatrixXd fd = (gram(kp, pts) - gram(km, pts)) / 2e-6;
      CHECK((grads[static_cast<std::size_t>(p)] - fd).cwiseAbs().maxCoeff() <= 1e-6 * (1 + fd.cwiseAbs().maxCoeff()));
      CHECK(contracted[p] == Approx((W.array() * grads[static_cast<std::size_t>(p)].array()).sum()).epsilon(1e-10));
    }
  }
}

TEST_CASE("tied output scales share one parameter") {
  const auto space = make_space(bench::fig1_spec());
  AddTreeKernel k(space, AddTreeKernel::uniform(space, KernelKind::SquaredExponential, 1.0).all_params(),
                  ZeroDimPolicy::Constant, true);
  const AddTreeKernel untied = AddTreeKernel::uniform(space, KernelKind::SquaredExponential, 1.0);
  CHECK(k.layout().size() == untied.layout().size() - 2);
  Eigen::VectorXd th = k.log_params();
  th.setConstant(std::log(2.0));
  k.set_log_params(th);
  for (int v = 0; v < 3; ++v) CHECK(k.params(v).output_scale == Approx(2.0));
}
