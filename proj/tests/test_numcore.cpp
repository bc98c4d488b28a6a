#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bgcl/adam.hpp"
#include "bgcl/grad_check.hpp"
#include "bgcl/init.hpp"
#include "bgcl/rng.hpp"
#include "bgcl/special.hpp"
#include "bgcl/tape.hpp"

using namespace bgcl;

namespace {

Matrix random_matrix(int rows, int cols, RngStream& rng, double lo, double hi) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = lo + (hi - lo) * rng.uniform();
  return m;
}

// values bounded away from zero so kinked activations stay differentiable
// at every probe point
Matrix random_signed(int rows, int cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double mag = 0.1 + 1.9 * rng.uniform();
      m(r, c) = rng.bernoulli(0.5) ? mag : -mag;
    }
  return m;
}

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

void check_gradients(const Builder& f, const std::vector<Matrix>& inputs, double tol) {
  ParamSet params;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    names.push_back("p" + std::to_string(i));
    params[names.back()] = inputs[i];
  }
  auto eval = [&](const ParamSet& ps) {
    Tape t;
    std::vector<Var> vars;
    for (const auto& n : names) vars.push_back(t.constant(ps.at(n)));
    return f(t, vars).scalar();
  };
  const ParamSet fd = finite_diff_grad(eval, params, 1e-5);

  Tape t;
  std::vector<Var> vars;
  for (const auto& n : names) vars.push_back(t.parameter(params.at(n)));
  const GradMap grads = t.backward(f(t, vars));
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double err = max_rel_error(grads.at(vars[i].id()), fd.at(names[i]));
    CHECK(err < tol);
  }
}

void check_many(const Builder& f, std::vector<std::pair<int, int>> shapes, int instances,
                std::uint64_t seed, bool positive = false, bool signed_away = false,
                double scale = 1.0) {
  RngStream rng(seed);
  for (int it = 0; it < instances; ++it) {
    std::vector<Matrix> inputs;
    for (auto [r, c] : shapes) {
      if (positive)
        inputs.push_back(scale * random_matrix(r, c, rng, 0.3, 2.5));
      else if (signed_away)
        inputs.push_back(scale * random_signed(r, c, rng));
      else
        inputs.push_back(scale * random_matrix(r, c, rng, -2.0, 2.0));
    }
    check_gradients(f, inputs, 1e-5);
  }
}

}  // namespace

TEST_CASE("backward: spec examples") {
  {
    Tape t;
    Var x = t.parameter(Matrix::Constant(1, 1, 3.0));
    GradMap g = t.backward(mul(x, x));
    CHECK(g.at(x.id())(0, 0) == doctest::Approx(6.0).epsilon(1e-12));
  }
  {
    Tape t;
    Var w = t.parameter(random_matrix(3, 4, *new RngStream(7), -1, 1));
    GradMap g = t.backward(sum(w));
    CHECK((g.at(w.id()) - Matrix::Ones(3, 4)).cwiseAbs().maxCoeff() == 0.0);
  }
  {
    RngStream rng(11);
    const Matrix a = random_matrix(3, 4, rng, -1, 1);
    const Matrix b = random_matrix(4, 2, rng, -1, 1);
    check_gradients([](Tape&, const std::vector<Var>& v) { return sum(matmul(v[0], v[1])); },
                    {a, b}, 1e-6);
  }
}

TEST_CASE("backward: error paths and linearity") {
  {
    Tape t;
    Var x = t.parameter(Matrix::Ones(2, 2));
    CHECK_THROWS(t.backward(mul(x, x)));  // non-scalar root
  }
  {
    Tape t;
    Var x = t.parameter(Matrix::Ones(1, 1));
    Var r = mul(x, x);
    t.backward(r);
    CHECK_THROWS(t.backward(r));  // tape consumed
  }
  {
    // grad(a*f + b*g) == a*grad(f) + b*grad(g)
    RngStream rng(3);
    const Matrix x0 = random_matrix(3, 3, rng, -2, 2);
    const double a = 1.7, b = -0.4;
    auto grad_of = [&](std::function<Var(Tape&, Var)> fn) {
      Tape t;
      Var x = t.parameter(x0);
      return t.backward(fn(t, x)).at(x.id());
    };
    Matrix gf = grad_of([](Tape&, Var x) { return sum_squares(x); });
    Matrix gg = grad_of([](Tape&, Var x) { return sum(sigmoid(x)); });
    Matrix gc = grad_of([&](Tape&, Var x) {
      return add(affine(sum_squares(x), a, 0.0), affine(sum(sigmoid(x)), b, 0.0));
    });
    CHECK((gc - (a * gf + b * gg)).cwiseAbs().maxCoeff() < 1e-10);
  }
  {
    Matrix bad(1, 1);
    bad(0, 0) = std::nan("");
    Tape t;
    CHECK_THROWS(t.input(bad));
  }
  {
    // unreached parameter maps to zero
    Tape t;
    Var x = t.parameter(Matrix::Ones(1, 1));
    Var y = t.parameter(Matrix::Ones(2, 2));
    GradMap g = t.backward(mul(x, x));
    CHECK(g.at(y.id()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("every differentiable primitive matches finite differences") {
  const int kInstances = 50;
  check_many([](Tape&, const std::vector<Var>& v) { return sum(matmul(v[0], v[1])); },
             {{3, 4}, {4, 2}}, kInstances, 101);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(add(v[0], v[1])); },
             {{3, 3}, {3, 3}}, kInstances, 102);
  check_many([](Tape&, const std::vector<Var>& v) { return sum(mul(v[0], v[1])); },
             {{2, 5}, {2, 5}}, kInstances, 103);
  check_many([](Tape&, const std::vector<Var>& v) { return sum(div(v[0], v[1])); },
             {{2, 3}, {2, 3}}, kInstances, 104, /*positive=*/true);
  check_many([](Tape&, const std::vector<Var>& v) { return sum(sub(v[0], v[1])); },
             {{2, 3}, {2, 3}}, kInstances, 105);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(sigmoid(v[0])); },
             {{3, 3}}, kInstances, 106);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(relu(v[0])); },
             {{4, 3}}, kInstances, 107, false, /*signed_away=*/true);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(prelu(v[0], v[1])); },
             {{4, 3}, {1, 1}}, kInstances, 108, false, /*signed_away=*/true);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(elu(v[0])); },
             {{4, 3}}, kInstances, 109, false, /*signed_away=*/true);
  check_many([](Tape&, const std::vector<Var>& v) { return sum(exp(v[0])); },
             {{3, 3}}, kInstances, 110);
  check_many([](Tape&, const std::vector<Var>& v) { return sum(log(v[0])); },
             {{3, 3}}, kInstances, 111, /*positive=*/true);
  check_many([](Tape&, const std::vector<Var>& v) { return sum(sqrt(v[0])); },
             {{3, 3}}, kInstances, 112, /*positive=*/true);
  check_many([](Tape&, const std::vector<Var>& v) { return sum(v[0]); },
             {{3, 3}}, kInstances, 113);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(row_softmax(v[0])); },
             {{4, 5}}, kInstances, 114);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(row_log_softmax(v[0])); },
             {{4, 5}}, kInstances, 115);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(row_lse(v[0])); },
             {{4, 5}}, kInstances, 116);
  check_many([](Tape&, const std::vector<Var>& v) { return l2_norm(v[0]); },
             {{3, 4}}, kInstances, 117, /*positive=*/true);
  // weighted sum: sum_squares of normalized rows is identically the row count
  check_many([](Tape&, const std::vector<Var>& v) { return sum(mul(rows_normalize(v[0]), v[1])); },
             {{4, 3}, {4, 3}}, kInstances, 118, /*positive=*/true);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(transpose(v[0])); },
             {{3, 4}}, kInstances, 119);
  check_many([](Tape&, const std::vector<Var>& v) { return sum(affine(v[0], 1.3, -0.2)); },
             {{3, 4}}, kInstances, 120);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(add_scalar_bcast(v[0], v[1])); },
             {{1, 1}, {3, 4}}, kInstances, 121);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(mul_scalar_bcast(v[0], v[1])); },
             {{1, 1}, {3, 4}}, kInstances, 122);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(add_row_bcast(v[0], v[1])); },
             {{4, 3}, {1, 3}}, kInstances, 123);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(mul_row_bcast(v[0], v[1])); },
             {{4, 3}, {1, 3}}, kInstances, 124);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(diag_vec(v[0])); },
             {{4, 4}}, kInstances, 125);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(slice_cols(v[0], 1, 3)); },
             {{4, 5}}, kInstances, 126);
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(hconcat({v[0], v[1]})); },
             {{3, 2}, {3, 4}}, kInstances, 127);
  // keep gram magnitudes mild so finite-difference cancellation noise stays
  // below the tolerance
  check_many([](Tape&, const std::vector<Var>& v) { return sum_squares(exp_scaled_gram(v[0], v[1], 0.7)); },
             {{3, 4}, {5, 4}}, kInstances, 128, false, false, 0.35);
  check_many([](Tape&, const std::vector<Var>& v) { return sum(digamma_of(v[0])); },
             {{2, 3}}, kInstances, 129, /*positive=*/true);
  check_many([](Tape&, const std::vector<Var>& v) {
               return sum(gather_cols(v[0], {2, 0, 1, 3}));
             },
             {{4, 5}}, kInstances, 130);
  check_many([](Tape&, const std::vector<Var>& v) { return mean(v[0]); },
             {{3, 4}}, kInstances, 131);
  check_many([](Tape&, const std::vector<Var>& v) { return sum(col_sum(mul(v[0], v[0]))); },
             {{3, 4}}, kInstances, 132);
}

TEST_CASE("finite_diff_grad: spec examples") {
  {
    ParamSet p{{"x", Matrix::Constant(1, 1, 3.0)}};
    auto f = [](const ParamSet& ps) { return ps.at("x")(0, 0) * ps.at("x")(0, 0); };
    CHECK(finite_diff_grad(f, p, 1e-4).at("x")(0, 0) == doctest::Approx(6.0).epsilon(1e-7));
  }
  {
    ParamSet p{{"x", Matrix::Zero(1, 1)}};
    auto f = [](const ParamSet& ps) { return 1.0 / (1.0 + std::exp(-ps.at("x")(0, 0))); };
    CHECK(std::abs(finite_diff_grad(f, p, 1e-4).at("x")(0, 0) - 0.25) < 1e-8);
  }
  {
    ParamSet p{{"x", Matrix::Constant(1, 1, 2.0)}};
    auto f = [](const ParamSet& ps) { return std::log(ps.at("x")(0, 0)); };
    CHECK(std::abs(finite_diff_grad(f, p, 1e-4).at("x")(0, 0) - 0.5) < 1e-8);
  }
  {
    ParamSet p{{"x", Matrix::Zero(1, 1)}};
    auto f = [](const ParamSet&) { return std::numeric_limits<double>::quiet_NaN(); };
    CHECK_THROWS(finite_diff_grad(f, p, 1e-4));
  }
}

TEST_CASE("adam: spec examples and zero-grad identity") {
  {
    ParamSet p{{"w", Matrix::Zero(1, 1)}};
    ParamSet g{{"w", Matrix::Ones(1, 1)}};
    AdamState st;
    st.lr = 0.1;
    adam_step(p, g, st);
    CHECK(std::abs(p["w"](0, 0) + 0.1) < 1e-6);
  }
  {
    RngStream rng(5);
    ParamSet p{{"w", random_matrix(3, 3, rng, -1, 1)}};
    const Matrix before = p["w"];
    ParamSet g{{"w", Matrix::Zero(3, 3)}};
    AdamState st;
    adam_step(p, g, st);
    adam_step(p, g, st);
    CHECK((p["w"] - before).cwiseAbs().maxCoeff() == 0.0);
  }
  {
    ParamSet p{{"w", Matrix::Zero(1, 1)}};
    ParamSet g{{"w", Matrix::Constant(1, 1, -2.0)}};
    AdamState st;
    st.lr = 0.1;
    adam_step(p, g, st);
    CHECK(std::abs(p["w"](0, 0) - 0.1) < 1e-6);
  }
  {
    ParamSet p{{"w", Matrix::Zero(2, 2)}};
    ParamSet g{{"w", Matrix::Zero(3, 3)}};
    AdamState st;
    CHECK_THROWS(adam_step(p, g, st));
  }
}

TEST_CASE("xavier_init: bounds, determinism, mean") {
  {
    RngStream rng(1);
    const Matrix w = xavier_init(100, 100, rng);
    const double bound = std::sqrt(6.0 / 200.0);
    CHECK(w.maxCoeff() <= bound);
    CHECK(w.minCoeff() >= -bound);
  }
  {
    RngStream r1(42), r2(42);
    CHECK((xavier_init(20, 30, r1) - xavier_init(20, 30, r2)).cwiseAbs().maxCoeff() == 0.0);
  }
  {
    RngStream rng(9);
    const Matrix w = xavier_init(1000, 1000, rng);
    CHECK(std::abs(w.mean()) < 0.002);
  }
}

TEST_CASE("digamma and trigamma") {
  CHECK(std::abs(digamma(1.0) + kEulerGamma) < 1e-10);
  CHECK(std::abs(digamma(2.0) - (1.0 - kEulerGamma)) < 1e-10);
  CHECK(std::abs(trigamma(1.0) - M_PI * M_PI / 6.0) < 1e-10);
  for (double x = 0.1; x <= 10.0; x += 0.1)
    CHECK(std::abs(digamma(x + 1.0) - digamma(x) - 1.0 / x) < 1e-10);
  // trigamma is the derivative of digamma
  for (double x : {0.3, 1.0, 2.7, 8.0}) {
    const double fd = (digamma(x + 1e-6) - digamma(x - 1e-6)) / 2e-6;
    CHECK(std::abs(trigamma(x) - fd) < 1e-7);
  }
  CHECK_THROWS(digamma(0.0));
  CHECK_THROWS(digamma(-1.0));
  CHECK_THROWS(trigamma(-0.5));
}
