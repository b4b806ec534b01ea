#include "demonforge/qlinalg.hpp"

#include "doctest.h"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace demonforge;
using namespace testutil;

TEST_CASE("tensor products") {
  SUBCASE("identity case: I2/2 x I2/2 = I4/4 with dims [2,2]") {
    const auto t = tensor(maximally_mixed(2), maximally_mixed(2));
    CHECK(t.dims() == std::vector<Index>{2, 2});
    CHECK((t.matrix() - ComplexMatrix::Identity(4, 4) / 4.0).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("basis case: |0><0| x |1><1| = |01><01|") {
    const auto t = tensor(basis_state(2, 0), basis_state(2, 1));
    CHECK(std::abs(t.matrix()(1, 1) - Complex(1.0, 0.0)) < 1e-14);
    CHECK(t.matrix().cwiseAbs().sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("spectrum of a product is the pairwise products of factor spectra") {
    const auto rho = random_density(2, 2, 11);
    const auto sigma = random_density(3, 3, 12);
    const auto t = tensor(rho, sigma);
    // Independent route: eigensolve both factors, form all products.
    const auto er = hermitian_eig(rho.matrix());
    const auto es = hermitian_eig(sigma.matrix());
    std::vector<double> expected;
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 3; ++j) expected.push_back(er.values[i] * es.values[j]);
    std::sort(expected.begin(), expected.end());
    const auto et = hermitian_eig(t.matrix());
    for (Index i = 0; i < 6; ++i)
      CHECK(et.values[i] == doctest::Approx(expected[static_cast<std::size_t>(i)]).epsilon(1e-10));
  }
}

TEST_CASE("partial trace") {
  SUBCASE("product state marginal") {
    const auto rho = partial_trace(tensor(basis_state(2, 0), basis_state(2, 1)), {{0}});
    CHECK(trace_distance(rho, basis_state(2, 0)) < 1e-12);
  }
  SUBCASE("Bell marginal is maximally mixed") {
    const auto rho = partial_trace(bell_phi_plus(), {{0}});
    CHECK(trace_distance(rho, maximally_mixed(2)) < 1e-12);
  }
  SUBCASE("keep-first recovers the first factor entrywise") {
    const auto rho = random_density(3, 2, 21);
    const auto sigma = random_density(4, 4, 22);
    const auto back = partial_trace(tensor(rho, sigma), {{0}});
    CHECK((back.matrix() - rho.matrix()).cwiseAbs().maxCoeff() < 1e-12);
    const auto back_b = partial_trace(tensor(rho, sigma), {{1}});
    CHECK((back_b.matrix() - sigma.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("trace is preserved") {
    const auto rho = random_density(12, 5, 23).regrouped({2, 3, 2});
    const auto red = partial_trace(rho, {{0, 2}});
    CHECK(red.matrix().trace().real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(red.dims() == std::vector<Index>{2, 2});
  }
  SUBCASE("invalid selector") {
    const auto rho = random_density(4, 2, 24).regrouped({2, 2});
    CHECK_THROWS_AS((void)partial_trace(rho, {{0, 5}}), std::invalid_argument);
    CHECK_THROWS_AS((void)partial_trace(rho, {{1, 1}}), std::invalid_argument);
  }
}

TEST_CASE("hermitian eigendecomposition") {
  SUBCASE("already diagonal") {
    const auto es = hermitian_eig(two_level(1.7));
    CHECK(es.values[0] == doctest::Approx(0.0));
    CHECK(es.values[1] == doctest::Approx(1.7));
    CHECK((es.vectors.cwiseAbs() - ComplexMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("Pauli-X spectrum") {
    const auto es = hermitian_eig(HermitianOperator(pauli_x()));
    CHECK(es.values[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(es.values[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("random 8x8 reconstruction and unitarity residuals") {
    const auto h = random_hermitian(8, 1.0, 31);
    const auto es = hermitian_eig(h);
    const double scale = es.values.cwiseAbs().maxCoeff();
    const ComplexMatrix rebuilt = es.vectors * es.values.asDiagonal() * es.vectors.adjoint();
    CHECK((rebuilt - h.matrix()).cwiseAbs().maxCoeff() <= 1e-9 * scale);
    CHECK(unitarity_residual(es.vectors) <= 1e-9);
    CHECK(std::is_sorted(es.values.begin(), es.values.end()));
  }
}

TEST_CASE("von Neumann entropy") {
  SUBCASE("maximally mixed qubit") {
    CHECK(von_neumann_entropy(maximally_mixed(2)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("pure states have zero entropy") {
    CHECK(von_neumann_entropy(random_density(5, 1, 41)) == doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("scalar evaluation for diag(0.25, 0.75)") {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 0) = 0.25;
    m(1, 1) = 0.75;
    const double expected = -0.25 * std::log(0.25) - 0.75 * std::log(0.75);
    CHECK(von_neumann_entropy(DensityOperator(m, {2})) == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("eigenvalue below the floor is an error") {
    RealVector bad(2);
    bad << 1.1, -0.1;
    CHECK_THROWS_AS((void)entropy_of_spectrum(bad), std::invalid_argument);
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 0) = 1.1;
    m(1, 1) = -0.1;
    CHECK_THROWS_AS(DensityOperator(m, {2}), std::invalid_argument);
  }
  SUBCASE("tiny negatives are clipped") {
    RealVector noisy(2);
    noisy << 1.0, -1e-12;
    CHECK(entropy_of_spectrum(noisy) == doctest::Approx(0.0));
  }
}

TEST_CASE("relative entropy") {
  SUBCASE("identity case") {
    const auto rho = random_density(4, 3, 51);
    CHECK(relative_entropy(rho, rho) == doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("pure vs maximally mixed") {
    CHECK(relative_entropy(basis_state(2, 0), maximally_mixed(2)) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("disjoint support is infinite") {
    CHECK(std::isinf(relative_entropy(basis_state(2, 0), basis_state(2, 1))));
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS((void)relative_entropy(maximally_mixed(2), maximally_mixed(3)),
                    std::invalid_argument);
  }
  SUBCASE("nonnegative on random pairs; zero only at equality") {
    for (std::uint64_t s = 0; s < 40; ++s) {
      const auto rho = random_density(3, 3, 100 + s);
      const auto sigma = random_density(3, 3, 200 + s);
      const double d = relative_entropy(rho, sigma);
      CHECK(d >= -1e-9);
      if ((rho.matrix() - sigma.matrix()).cwiseAbs().maxCoeff() > 1e-8) CHECK(d > 0.0);
    }
  }
}

TEST_CASE("canonical states") {
  SUBCASE("degenerate Hamiltonian gives the uniform state") {
    const double beta = 2.5;
    const auto [rho, f] = canonical_state(HermitianOperator::zero(3), beta);
    CHECK(trace_distance(rho, maximally_mixed(3)) < 1e-12);
    CHECK(f == doctest::Approx(-std::log(3.0) / beta).epsilon(1e-13));
  }
  SUBCASE("two-level populations at beta*E = 20") {
    const auto [rho, f] = canonical_state(two_level(20.0), 1.0);
    CHECK(rho.matrix()(0, 0).real() ==
          doctest::Approx(1.0 / (1.0 + std::exp(-20.0))).epsilon(1e-14));
    CHECK(f == doctest::Approx(-std::log1p(std::exp(-20.0))).epsilon(1e-12));
    CHECK(rho.matrix().trace().real() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("zero-temperature limit selects the ground state") {
    ComplexMatrix h = ComplexMatrix::Zero(2, 2);
    h(0, 0) = 0.3;
    h(1, 1) = 1.3;
    const auto [rho, f] = canonical_state(HermitianOperator(h), 900.0);
    CHECK(trace_distance(rho, basis_state(2, 0)) < 1e-12);
    CHECK(f == doctest::Approx(0.3).epsilon(1e-12));
  }
  SUBCASE("free-energy minimality among random states") {
    const double beta = 1.7;
    const auto h = random_hermitian(4, 1.0, 61);
    const auto [rho_can, f] = canonical_state(h, beta);
    const double f_can =
        (rho_can.matrix() * h.matrix()).trace().real() - von_neumann_entropy(rho_can) / beta;
    CHECK(f_can == doctest::Approx(f).epsilon(1e-10));
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto rho = random_density(4, 4, 300 + s);
      const double fr =
          (rho.matrix() * h.matrix()).trace().real() - von_neumann_entropy(rho) / beta;
      CHECK(fr >= f_can - 1e-9);
    }
  }
}

TEST_CASE("unitary from generator") {
  SUBCASE("zero generator") {
    const auto u = unitary_from_generator(HermitianOperator::zero(3));
    CHECK((u - ComplexMatrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("pi/2 Pauli-X generator flips the spin (up to phase)") {
    const auto u = unitary_from_generator(HermitianOperator(M_PI / 2.0 * pauli_x()));
    CHECK(std::abs(u(0, 1)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(u(0, 0)) < 1e-12);
  }
  SUBCASE("always unitary") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto u = unitary_from_generator(random_hermitian(5, 2.0, 70 + s));
      CHECK(unitarity_residual(u) <= 1e-9);
    }
  }
}

TEST_CASE("random state and unitary generators") {
  SUBCASE("rank-1 densities are pure") {
    CHECK(von_neumann_entropy(random_density(2, 1, 81)) == doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("determinism") {
    CHECK((random_density(3, 2, 82).matrix() - random_density(3, 2, 82).matrix())
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((random_unitary(4, 83) - random_unitary(4, 83)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("unitarity residual") {
    CHECK(unitarity_residual(random_unitary(4, 84)) <= 1e-10);
  }
  SUBCASE("invalid rank") {
    CHECK_THROWS_AS((void)random_density(2, 0, 85), std::invalid_argument);
    CHECK_THROWS_AS((void)random_density(2, 3, 86), std::invalid_argument);
  }
  SUBCASE("validity of generated states") {
    for (std::uint64_t s = 0; s < 30; ++s) {
      const auto rho = random_density(5, 1 + static_cast<Index>(s % 5), 400 + s);
      CHECK(std::abs(rho.matrix().trace().real() - 1.0) <= 1e-10);
      const auto es = hermitian_eig(rho.matrix());
      CHECK(es.values.minCoeff() >= -1e-9);
    }
  }
}

TEST_CASE("entropy invariances") {
  SUBCASE("unitary invariance") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto rho = random_density(4, 3, 500 + s);
      const auto u = random_unitary(4, 600 + s);
      CHECK(von_neumann_entropy(rho.evolved(u)) ==
            doctest::Approx(von_neumann_entropy(rho)).epsilon(1e-9));
    }
  }
  SUBCASE("additivity over tensor products") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto rho = random_density(2, 2, 700 + s);
      const auto sigma = random_density(3, 2, 800 + s);
      CHECK(von_neumann_entropy(tensor(rho, sigma)) ==
            doctest::Approx(von_neumann_entropy(rho) + von_neumann_entropy(sigma))
                .epsilon(1e-9));
    }
  }
}

TEST_CASE("construction validation") {
  SUBCASE("non-unit trace") {
    CHECK_THROWS_AS(DensityOperator(ComplexMatrix::Identity(2, 2), {2}), std::invalid_argument);
  }
  SUBCASE("non-Hermitian density") {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 0) = 1.0;
    m(0, 1) = 0.1;
    CHECK_THROWS_AS(DensityOperator(m, {2}), std::invalid_argument);
  }
  SUBCASE("non-finite entries") {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((void)HermitianOperator{m}, std::invalid_argument);
  }
  SUBCASE("dims must factor the dimension") {
    CHECK_THROWS_AS(DensityOperator(ComplexMatrix::Identity(4, 4) / 4.0, {3}),
                    std::invalid_argument);
  }
  SUBCASE("non-Hermitian Hamiltonian") {
    ComplexMatrix m(2, 2);
    m << 0, 1, 2, 0;
    CHECK_THROWS_AS((void)HermitianOperator{m}, std::invalid_argument);
  }
}

TEST_CASE("more error paths") {
  SUBCASE("canonical state rejects nonpositive or non-finite beta") {
    CHECK_THROWS_AS((void)canonical_state(two_level(1.0), 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)canonical_state(two_level(1.0), -2.0), std::invalid_argument);
    CHECK_THROWS_AS((void)canonical_state(two_level(1.0), std::numeric_limits<double>::infinity()),
                    std::invalid_argument);
  }
  SUBCASE("regrouping must preserve the total dimension") {
    CHECK_THROWS_AS((void)maximally_mixed(4).regrouped({3, 2}), std::invalid_argument);
  }
  SUBCASE("support cutoff: weight on a near-null direction is infinite") {
    ComplexMatrix sigma = ComplexMatrix::Zero(2, 2);
    sigma(0, 0) = 1.0 - 1e-13;
    sigma(1, 1) = 1e-13;  // below the support cutoff
    CHECK(std::isinf(relative_entropy(maximally_mixed(2), DensityOperator(sigma, {2}))));
  }
}

TEST_CASE("factor embedding") {
  const std::vector<Index> dims{2, 3, 2};
  SUBCASE("embedding on the middle factor matches an explicit kron") {
    const auto op = random_unitary(3, 91);
    const auto lifted = embed_factor_operator(op, dims, {1});
    const ComplexMatrix expected =
        kron(kron(ComplexMatrix::Identity(2, 2), op), ComplexMatrix::Identity(2, 2));
    CHECK((lifted - expected).cwiseAbs().maxCoeff() < 1e-13);
  }
  SUBCASE("embedding on non-adjacent factors") {
    const auto op = random_unitary(4, 92);
    const auto lifted = embed_factor_operator(op, dims, {0, 2});
    CHECK(unitarity_residual(lifted) < 1e-12);
    // Partial trace over the untouched factor commutes with the action.
    const auto rho = random_density(12, 4, 93).regrouped({2, 3, 2});
    const auto lhs = partial_trace(rho.evolved(lifted), {{0, 2}});
    const auto rhs = partial_trace(rho, {{0, 2}}).evolved(op);
    CHECK(trace_distance(lhs, rhs) < 1e-11);
  }
  SUBCASE("dimension mismatch is rejected") {
    CHECK_THROWS_AS((void)embed_factor_operator(random_unitary(2, 94), dims, {1}),
                    std::invalid_argument);
  }
}
