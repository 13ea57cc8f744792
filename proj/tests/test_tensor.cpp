#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "layoutseq/error.hpp"

using namespace layoutseq;
using namespace layoutseq::tensor;

TEST_CASE("forward basics") {
  const Tensor z = Tensor::constant(Matrix::Zero(1, 3));
  const Matrix s = softmax(z).value();
  for (int i = 0; i < 3; ++i) CHECK(s(0, i) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  Rng rng = make_rng(1);
  const Matrix a = gradcheck::random_matrix(rng, 3, 4);
  CHECK(matmul(Tensor::constant(Matrix::Identity(3, 3)), Tensor::constant(a)).value() == a);

  Matrix logits = Matrix::Zero(2, 5);
  logits(0, 1) = 30.0;
  logits(1, 4) = 30.0;
  const std::vector<int> targets{1, 4};
  CHECK(cross_entropy(Tensor::constant(logits), targets).item() < 1e-9);

  const Matrix big = gradcheck::random_matrix(rng, 6, 9, 50.0);
  const Matrix sm = softmax(Tensor::constant(big)).value();
  for (Index i = 0; i < sm.rows(); ++i) CHECK(std::abs(sm.row(i).sum() - 1.0) < 1e-12);

  const Matrix x = gradcheck::random_matrix(rng, 5, 64, 5.0);
  const Matrix ln = layer_norm(Tensor::constant(x), Tensor::constant(Matrix::Ones(1, 64)),
                               Tensor::constant(Matrix::Zero(1, 64)))
                        .value();
  for (Index i = 0; i < ln.rows(); ++i) {
    const double mean = ln.row(i).mean();
    const double var = (ln.row(i).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("shape errors name both shapes") {
  const Tensor a = Tensor::constant(Matrix::Zero(2, 3));
  const Tensor b = Tensor::constant(Matrix::Zero(4, 5));
  try {
    matmul(a, b);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Shape);
    const std::string m = e.what();
    CHECK(m.find("2") != std::string::npos);
    CHECK(m.find("3") != std::string::npos);
    CHECK(m.find("4") != std::string::npos);
    CHECK(m.find("5") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, b), Error);
}

TEST_CASE("backward") {
  Matrix three(1, 1);
  three(0, 0) = 3.0;
  Tensor x = Tensor::parameter(three);
  mul(x, x).backward();
  CHECK(x.grad()(0, 0) == doctest::Approx(6.0));

  Tensor used = Tensor::parameter(Matrix::Ones(2, 2));
  Tensor unused = Tensor::parameter(Matrix::Ones(2, 2));
  sum(mul(used, used)).backward();
  CHECK(unused.grad().norm() == 0.0);

  try {
    mul(used, used).backward();
    FAIL("expected invalid use");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidUse);
  }
}

TEST_CASE("no-grad guard records nothing") {
  Tensor p = Tensor::parameter(Matrix::Ones(1, 2));
  NoGradGuard guard;
  const Tensor y = sum(mul(p, p));
  CHECK(y.node()->parents.empty());
}

TEST_CASE("gradient check over random graphs") {
  Rng rng = make_rng(17);
  const auto& ops = gradcheck::op_names();
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::string op = ops[static_cast<std::size_t>(i) % ops.size()];
    auto g = gradcheck::make_graph(op, rng);
    const auto r = gradcheck::check(g);
    INFO("op " << op << " graph " << i);
    CHECK(r.max_relative_error < 1e-4);
    CHECK(r.unused_zero);
    worst = std::max(worst, r.max_relative_error);
  }
  MESSAGE("worst relative error " << worst);
}

TEST_CASE("adam") {
  SUBCASE("warmup schedule") {
    Adam opt({Tensor::parameter(Matrix::Zero(1, 1))}, {.learning_rate = 0.01, .warmup_steps = 100});
    CHECK(opt.learning_rate_at(1) == doctest::Approx(0.01 * 1 / 100));
    CHECK(opt.learning_rate_at(50) == doctest::Approx(0.01 * 50 / 100));
    CHECK(opt.learning_rate_at(100) == doctest::Approx(0.01));
    CHECK(opt.learning_rate_at(500) == doctest::Approx(0.01));
  }
  SUBCASE("first step is about lr") {
    Tensor p = Tensor::parameter(Matrix::Zero(1, 1));
    Adam opt({p}, {.learning_rate = 0.1});
    p.grad_storage() = Matrix::Ones(1, 1);
    p.node()->grad_fresh = true;
    CHECK(opt.step());
    // m_hat = 1, v_hat = 1: update = lr / (1 + eps)
    CHECK(p.value()(0, 0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK_FALSE(p.has_grad());
  }
  SUBCASE("zero gradient leaves the parameter") {
    Tensor p = Tensor::parameter(Matrix::Constant(1, 1, 2.5));
    Adam opt({p}, {.learning_rate = 0.1});
    p.grad_storage() = Matrix::Zero(1, 1);
    p.node()->grad_fresh = true;
    opt.step();
    CHECK(p.value()(0, 0) == 2.5);
  }
  SUBCASE("stale gradients") {
    Tensor p = Tensor::parameter(Matrix::Zero(1, 1));
    Adam opt({p}, {});
    CHECK_FALSE(opt.step());
    CHECK(opt.step_count() == 0);
  }
}

TEST_CASE("checkpoint round trip") {
  Rng rng = make_rng(2);
  std::vector<NamedMatrix> tensors{{"a", gradcheck::random_matrix(rng, 3, 4)}, {"b.c", gradcheck::random_matrix(rng, 1, 7)}};
  const auto path = std::filesystem::temp_directory_path() / "layoutseq_test.ckpt";
  save_checkpoint(path, tensors);
  const auto back = load_checkpoint(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "a");
  CHECK(back[1].name == "b.c");
  CHECK(back[0].value == tensors[0].value);
  CHECK(back[1].value == tensors[1].value);
  std::ifstream f(path, std::ios::binary);
  char magic[4];
  f.read(magic, 4);
  CHECK(std::string(magic, 4) == "LSQT");
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), Error);
}
