#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "prb/optimizer.hpp"
#include "prb/params_io.hpp"
#include "prb/rng.hpp"
#include "prb/tape.hpp"

using namespace prb;
using namespace prb::nn;

namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    Tensor t(rows, cols);
    for (double& v : t.data()) v = rng.uniform(-scale, scale);
    return t;
}

} // namespace

TEST_CASE("dense_forward hand oracles") {
    Tape tape;
    ParameterSet params;
    params.add("w", Tensor(3, 2, 0.0));
    params.add("b", Tensor::vec(2, 0.0));
    Var w = tape.param(params.at("w").value, params.at("w").grad);
    Var b = tape.param(params.at("b").value, params.at("b").grad);
    Var x = tape.constant(Tensor::matrix(1, 3, {1.0, 2.0, 3.0}));

    // Zero weights and bias: the null map.
    Var y0 = dense_forward(x, w, b, Activation::identity);
    CHECK(y0.value()[0] == 0.0);
    CHECK(y0.value()[1] == 0.0);

    // Identity weights keep the input.
    ParameterSet id;
    id.add("w", Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    id.add("b", Tensor::vec(3, 0.0));
    Var wi = tape.param(id.at("w").value, id.at("w").grad);
    Var bi = tape.param(id.at("b").value, id.at("b").grad);
    Var y1 = dense_forward(x, wi, bi, Activation::identity);
    CHECK(y1.value()[0] == 1.0);
    CHECK(y1.value()[1] == 2.0);
    CHECK(y1.value()[2] == 3.0);

    // 1x1: w=2, b=1, x=3 -> 7.
    ParameterSet small;
    small.add("w", Tensor::matrix(1, 1, {2.0}));
    small.add("b", Tensor::vec(1, 1.0));
    Var ws = tape.param(small.at("w").value, small.at("w").grad);
    Var bs = tape.param(small.at("b").value, small.at("b").grad);
    Var y2 = dense_forward(tape.constant(Tensor::scalar(3.0)), ws, bs, Activation::identity);
    CHECK(y2.value()[0] == 7.0);

    CHECK_THROWS_AS(dense_forward(tape.constant(Tensor(1, 4)), w, b, Activation::identity),
                    std::invalid_argument);
}

TEST_CASE("dense gradient matches finite differences (polynomial case)") {
    Rng rng(31);
    ParameterSet params;
    params.add("w", random_tensor(4, 3, rng));
    params.add("b", Tensor::vec(3, 0.1));
    const Tensor x = random_tensor(2, 4, rng);
    const Tensor target = random_tensor(2, 3, rng);

    auto loss_fn = [&](bool with_grad) {
        Tape tape;
        tape.recording = with_grad;
        Var w = tape.param(params.at("w").value, params.at("w").grad);
        Var b = tape.param(params.at("b").value, params.at("b").grad);
        Var y = dense_forward(tape.constant(x), w, b, Activation::identity);
        Var loss = mse_loss(y, target);
        const double value = loss.value()[0];
        if (with_grad) tape.backward(loss);
        return value;
    };
    CHECK(grad_check(loss_fn, params, 60, 1e-4, 1) < 1e-6);
}

TEST_CASE("activations gradient check") {
    Rng rng(37);
    for (auto act : {Activation::tanh, Activation::relu, Activation::softplus,
                     Activation::sigmoid}) {
        ParameterSet params;
        params.add("w", random_tensor(3, 3, rng));
        params.add("b", Tensor::vec(3, 0.05));
        const Tensor x = random_tensor(2, 3, rng);
        const Tensor target = random_tensor(2, 3, rng);
        auto loss_fn = [&](bool with_grad) {
            Tape tape;
            tape.recording = with_grad;
            Var w = tape.param(params.at("w").value, params.at("w").grad);
            Var b = tape.param(params.at("b").value, params.at("b").grad);
            Var loss = mse_loss(dense_forward(tape.constant(x), w, b, act), target);
            const double v = loss.value()[0];
            if (with_grad) tape.backward(loss);
            return v;
        };
        CHECK(grad_check(loss_fn, params, 50, 1e-5, 2) < 1e-4);
    }
}

TEST_CASE("lstm cell zero parameters and states give zero output") {
    Tape tape;
    ParameterSet params;
    params.add("wx", Tensor(2, 8, 0.0));
    params.add("wh", Tensor(2, 8, 0.0));
    params.add("b", Tensor::vec(8, 0.0));
    LstmVars cell{tape.param(params.at("wx").value, params.at("wx").grad),
                  tape.param(params.at("wh").value, params.at("wh").grad),
                  tape.param(params.at("b").value, params.at("b").grad)};
    auto [h, c] = lstm_cell_forward(tape.constant(Tensor(1, 2)), tape.constant(Tensor(1, 2)),
                                    tape.constant(Tensor(1, 2)), cell);
    CHECK(h.value()[0] == 0.0);
    CHECK(h.value()[1] == 0.0);
    CHECK(c.value()[0] == 0.0);
}

TEST_CASE("lstm saturated gates preserve the cell state") {
    // Forget bias +20, input bias -20: c' ~= c_prev within 1e-6.
    const std::size_t H = 2;
    Tape tape;
    ParameterSet params;
    params.add("wx", Tensor(1, 4 * H, 0.0));
    params.add("wh", Tensor(H, 4 * H, 0.0));
    Tensor bias = Tensor::vec(4 * H, 0.0);
    for (std::size_t i = 0; i < H; ++i) bias[i] = -20.0;          // input gate off
    for (std::size_t i = H; i < 2 * H; ++i) bias[i] = 20.0;      // forget gate on
    params.add("b", std::move(bias));

    LstmVars cell{tape.param(params.at("wx").value, params.at("wx").grad),
                  tape.param(params.at("wh").value, params.at("wh").grad),
                  tape.param(params.at("b").value, params.at("b").grad)};
    Tensor c_prev = Tensor::matrix(1, H, {0.7, -0.4});
    auto [h, c] = lstm_cell_forward(tape.constant(Tensor::matrix(1, 1, {0.3})),
                                    tape.constant(Tensor(1, H)), tape.constant(c_prev), cell);
    CHECK(std::fabs(c.value()[0] - 0.7) < 1e-6);
    CHECK(std::fabs(c.value()[1] + 0.4) < 1e-6);
    (void)h;
}

TEST_CASE("lstm gradient matches finite differences over an unrolled sequence") {
    Rng rng(41);
    const std::size_t H = 3;
    ParameterSet params;
    params.add("wx", random_tensor(2, 4 * H, rng, 0.5));
    params.add("wh", random_tensor(H, 4 * H, rng, 0.5));
    params.add("b", Tensor::vec(4 * H, 0.01));
    params.add("head.w", random_tensor(H, 1, rng, 0.5));
    params.add("head.b", Tensor::vec(1, 0.0));

    std::vector<Tensor> inputs;
    for (int t = 0; t < 4; ++t) inputs.push_back(random_tensor(1, 2, rng));
    const Tensor target = Tensor::scalar(0.37);

    auto loss_fn = [&](bool with_grad) {
        Tape tape;
        tape.recording = with_grad;
        LstmVars cell{tape.param(params.at("wx").value, params.at("wx").grad),
                      tape.param(params.at("wh").value, params.at("wh").grad),
                      tape.param(params.at("b").value, params.at("b").grad)};
        Var hw = tape.param(params.at("head.w").value, params.at("head.w").grad);
        Var hb = tape.param(params.at("head.b").value, params.at("head.b").grad);
        Var h = tape.constant(Tensor(1, H));
        Var c = tape.constant(Tensor(1, H));
        for (const auto& x : inputs) {
            auto [h2, c2] = lstm_cell_forward(tape.constant(x), h, c, cell);
            h = h2;
            c = c2;
        }
        Var loss = mse_loss(dense_forward(h, hw, hb, Activation::identity), target);
        const double v = loss.value()[0];
        if (with_grad) tape.backward(loss);
        return v;
    };
    CHECK(grad_check(loss_fn, params, 80, 1e-5, 3) < 1e-4);
}

TEST_CASE("attention hand oracles") {
    Tape tape;

    // A single key/value pair gets weight 1 regardless of the query.
    Var out1 = attention_forward(tape.constant(Tensor::matrix(1, 2, {3.0, -1.0})),
                                 tape.constant(Tensor::matrix(1, 2, {0.5, 0.5})),
                                 tape.constant(Tensor::matrix(1, 3, {7.0, 8.0, 9.0})));
    CHECK(out1.value()[0] == doctest::Approx(7.0));
    CHECK(out1.value()[1] == doctest::Approx(8.0));
    CHECK(out1.value()[2] == doctest::Approx(9.0));

    // Two identical keys split the weight evenly.
    Var out2 = attention_forward(tape.constant(Tensor::matrix(1, 2, {1.0, 2.0})),
                                 tape.constant(Tensor::matrix(2, 2, {0.3, 0.4, 0.3, 0.4})),
                                 tape.constant(Tensor::matrix(2, 1, {10.0, 20.0})));
    CHECK(out2.value()[0] == doctest::Approx(15.0).epsilon(1e-12));

    // d=1, q=1, keys (ln2, 0): softmax weights (2/3, 1/3) by hand.
    Var weights;
    Var out3 = attention_forward(tape.constant(Tensor::matrix(1, 1, {1.0})),
                                 tape.constant(Tensor::matrix(2, 1, {std::log(2.0), 0.0})),
                                 tape.constant(Tensor::matrix(2, 1, {3.0, 9.0})), false,
                                 &weights);
    CHECK(weights.value()(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(weights.value()(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(out3.value()[0] == doctest::Approx(5.0).epsilon(1e-12));

    CHECK_THROWS_AS(attention_forward(tape.constant(Tensor(1, 2)), tape.constant(Tensor(2, 3)),
                                      tape.constant(Tensor(2, 1))),
                    std::invalid_argument);
    CHECK_THROWS_AS(attention_forward(tape.constant(Tensor(1, 2)), tape.constant(Tensor(2, 2)),
                                      tape.constant(Tensor(3, 1))),
                    std::invalid_argument);
}

TEST_CASE("attention weights are a distribution per query row") {
    Rng rng(43);
    Tape tape;
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t m = 1 + rng.uniform_index(6);
        const std::size_t s = 1 + rng.uniform_index(6);
        const std::size_t d = 1 + rng.uniform_index(5);
        Var weights;
        attention_forward(tape.constant(random_tensor(m, d, rng, 2.0)),
                          tape.constant(random_tensor(s, d, rng, 2.0)),
                          tape.constant(random_tensor(s, 2, rng, 2.0)), false, &weights);
        const Tensor& w = weights.value();
        for (std::size_t r = 0; r < m; ++r) {
            double sum = 0.0;
            for (std::size_t ccol = 0; ccol < s; ++ccol) {
                CHECK(w(r, ccol) >= 0.0);
                sum += w(r, ccol);
            }
            CHECK(std::fabs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("causal attention masks future positions") {
    Rng rng(47);
    Tape tape;
    Var weights;
    attention_forward(tape.constant(random_tensor(4, 3, rng)),
                      tape.constant(random_tensor(4, 3, rng)),
                      tape.constant(random_tensor(4, 2, rng)), true, &weights);
    const Tensor& w = weights.value();
    for (std::size_t r = 0; r < 4; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 4; ++c) {
            if (c > r) CHECK(w(r, c) == 0.0);
            sum += w(r, c);
        }
        CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("attention gradient matches finite differences") {
    Rng rng(53);
    ParameterSet params;
    params.add("wq", random_tensor(3, 3, rng, 0.7));
    params.add("wk", random_tensor(3, 3, rng, 0.7));
    params.add("wv", random_tensor(3, 3, rng, 0.7));
    const Tensor x = random_tensor(5, 3, rng);
    const Tensor target = random_tensor(5, 3, rng);

    for (bool causal : {false, true}) {
        auto loss_fn = [&](bool with_grad) {
            Tape tape;
            tape.recording = with_grad;
            Var wq = tape.param(params.at("wq").value, params.at("wq").grad);
            Var wk = tape.param(params.at("wk").value, params.at("wk").grad);
            Var wv = tape.param(params.at("wv").value, params.at("wv").grad);
            Var xin = tape.constant(x);
            Var out = attention_forward(matmul(xin, wq), matmul(xin, wk), matmul(xin, wv),
                                        causal);
            Var loss = mse_loss(out, target);
            const double v = loss.value()[0];
            if (with_grad) tape.backward(loss);
            return v;
        };
        CHECK(grad_check(loss_fn, params, 60, 1e-5, 4) < 1e-4);
    }
}

TEST_CASE("gaussian_nll closed forms and gradient") {
    Tape tape;
    ParameterSet params;
    params.add("mu", Tensor::scalar(0.0));
    params.add("sigma_raw", Tensor::scalar(1.0));

    // mu = x, sigma = 1: 0.5*ln(2*pi).
    {
        Var mu = tape.constant(Tensor::scalar(1.5));
        Var sigma = tape.constant(Tensor::scalar(1.0));
        Var nll = gaussian_nll(mu, sigma, Tensor::scalar(1.5));
        CHECK(nll.value()[0] == doctest::Approx(0.9189385332046727).epsilon(1e-12));
    }
    // mu = 0, sigma = 1, x = 1: 0.5*ln(2*pi) + 0.5.
    {
        Var mu = tape.constant(Tensor::scalar(0.0));
        Var sigma = tape.constant(Tensor::scalar(1.0));
        Var nll = gaussian_nll(mu, sigma, Tensor::scalar(1.0));
        CHECK(nll.value()[0] == doctest::Approx(1.4189385332046727).epsilon(1e-12));
    }
    // d(nll)/d(mu) at (0, 1, x=1) is -1.
    {
        Tape t2;
        Var mu = t2.param(params.at("mu").value, params.at("mu").grad);
        Var sigma = t2.constant(Tensor::scalar(1.0));
        Var nll = gaussian_nll(mu, sigma, Tensor::scalar(1.0));
        params.zero_grads();
        t2.backward(nll);
        CHECK(params.at("mu").grad[0] == doctest::Approx(-1.0).epsilon(1e-9));
    }
    auto loss_fn = [&](bool with_grad) {
        Tape t3;
        t3.recording = with_grad;
        Var mu = t3.param(params.at("mu").value, params.at("mu").grad);
        Var sraw = t3.param(params.at("sigma_raw").value, params.at("sigma_raw").grad);
        Var sigma = affine_const(activate(sraw, Activation::softplus), 1.0, 1e-4);
        Var nll = gaussian_nll(mu, sigma, Tensor::scalar(1.0));
        const double v = nll.value()[0];
        if (with_grad) t3.backward(nll);
        return v;
    };
    CHECK(grad_check(loss_fn, params, 50, 1e-6, 5) < 1e-6);
}

TEST_CASE("gaussian_nll is minimized in mu at the target") {
    // Gradient sign changes around mu = target.
    for (double delta : {0.05, 0.5, 2.0}) {
        ParameterSet params;
        params.add("mu", Tensor::scalar(3.0 + delta));
        auto grad_at = [&](double mu_value) {
            params.at("mu").value[0] = mu_value;
            params.zero_grads();
            Tape tape;
            Var mu = tape.param(params.at("mu").value, params.at("mu").grad);
            Var nll = gaussian_nll(mu, tape.constant(Tensor::scalar(0.8)),
                                   Tensor::scalar(3.0));
            tape.backward(nll);
            return params.at("mu").grad[0];
        };
        CHECK(grad_at(3.0 + delta) > 0.0);
        CHECK(grad_at(3.0 - delta) < 0.0);
    }
}

TEST_CASE("adam zero gradients leave parameters unchanged") {
    ParameterSet params;
    params.add("w", Tensor::matrix(1, 3, {1.0, -2.0, 0.5}));
    const std::vector<double> before = params.at("w").value.data();
    AdamState adam(1e-3);
    params.zero_grads();
    adam.step(params);
    adam.step(params);
    CHECK(params.at("w").value.data() == before);
    CHECK(adam.t == 2);
}

TEST_CASE("adam first step is a bias-corrected unit step") {
    ParameterSet params;
    params.add("w", Tensor::scalar(1.0));
    AdamState adam(0.1);
    params.at("w").grad[0] = 1.0;
    adam.step(params);
    // m_hat = 1, v_hat = 1 -> step = lr / (1 + eps).
    CHECK(params.at("w").value[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
}

TEST_CASE("adam minimizes a scalar quadratic") {
    ParameterSet params;
    params.add("w", Tensor::scalar(1.0));
    AdamState adam(0.05);
    for (int step = 0; step < 200; ++step) {
        params.zero_grads();
        params.at("w").grad[0] = 2.0 * params.at("w").value[0];
        adam.step(params);
    }
    CHECK(std::fabs(params.at("w").value[0]) < 0.05);
}

TEST_CASE("gradient clipping rescales to the global norm bound") {
    ParameterSet params;
    params.add("a", Tensor::matrix(1, 2, {0.0, 0.0}));
    params.at("a").grad[0] = 30.0;
    params.at("a").grad[1] = 40.0; // norm 50
    params.clip_global_norm(10.0);
    CHECK(params.grad_norm() == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(params.at("a").grad[0] == doctest::Approx(6.0));
    CHECK(params.at("a").grad[1] == doctest::Approx(8.0));

    params.at("a").grad[0] = 1.0;
    params.at("a").grad[1] = 0.0;
    params.clip_global_norm(10.0); // below the bound: untouched
    CHECK(params.at("a").grad[0] == 1.0);
}

TEST_CASE("grad_check validates epsilon range and loss finiteness") {
    ParameterSet params;
    params.add("w", Tensor::scalar(1.0));
    auto fine = [&](bool) { return 1.0; };
    CHECK_THROWS_AS(grad_check(fine, params, 1, 1e-2, 0), std::invalid_argument);
    auto bad = [&](bool) { return std::numeric_limits<double>::infinity(); };
    CHECK_THROWS_AS(grad_check(bad, params, 1, 1e-5, 0), std::runtime_error);
}

TEST_CASE("parameter file round trip is bit exact") {
    Rng rng(59);
    ParameterSet params;
    params.add("layer.w", random_tensor(7, 5, rng, 3.0));
    params.add("layer.b", Tensor::vec({0.25, -1.0 / 3.0, 1e-300}));
    params.add("head", random_tensor(1, 1, rng));

    const auto bytes = serialize_params(params);
    CHECK(bytes.size() > 4);
    CHECK(bytes[0] == 'P');
    CHECK(bytes[1] == 'R');
    CHECK(bytes[2] == 'B');
    CHECK(bytes[3] == 'M');

    ParameterSet back = deserialize_params(bytes);
    REQUIRE(back.count() == params.count());
    for (std::size_t i = 0; i < params.count(); ++i) {
        const auto& a = params.entries()[i];
        const auto& b = back.entries()[i];
        CHECK(a.name == b.name);
        CHECK(a.value.rank() == b.value.rank());
        CHECK(a.value.rows() == b.value.rows());
        CHECK(a.value.cols() == b.value.cols());
        CHECK(a.value.data() == b.value.data()); // exact doubles
    }
    CHECK(serialize_params(back) == bytes);
    CHECK(params_fingerprint(back) == params_fingerprint(params));

    std::vector<std::uint8_t> corrupt = bytes;
    corrupt[0] = 'X';
    CHECK_THROWS_AS(deserialize_params(corrupt), std::runtime_error);
    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 3);
    CHECK_THROWS_AS(deserialize_params(truncated), std::runtime_error);
}
