#include <doctest.h>

#include <cmath>
#include <limits>

#include "lmnav/nn.hpp"

using namespace lmnav;
using namespace lmnav::nn;
using world::ActionTriple;

namespace {

// Straightforward per-neuron forward, independent of the gemm path.
std::vector<double> naive_forward(const NetSpec& spec, const std::vector<double>& params,
                                  std::vector<double> x) {
    for (size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& layer = spec.layers[l];
        const double* W = params.data() + spec.weight_offset(static_cast<int>(l));
        const double* b = params.data() + spec.bias_offset(static_cast<int>(l));
        std::vector<double> y(layer.outputDim);
        for (int o = 0; o < layer.outputDim; ++o) {
            double s = b[o];
            for (int i = 0; i < layer.inputDim; ++i) s += W[o * layer.inputDim + i] * x[i];
            switch (layer.activation) {
                case Activation::Identity: y[o] = s; break;
                case Activation::Relu: y[o] = s > 0 ? s : 0; break;
                case Activation::Tanh: y[o] = std::tanh(s); break;
            }
        }
        x = std::move(y);
    }
    return x;
}

ActionTriple random_label(Rng& rng) {
    return {rng.uniform_int(-1, 1), rng.uniform_int(-1, 1), rng.uniform_int(-1, 1)};
}

}  // namespace

TEST_CASE("identity layer with identity weights passes input through") {
    NetSpec spec;
    spec.layers = {{4, 4, Activation::Identity}};
    Mlp net(spec);
    for (int i = 0; i < 4; ++i) net.params[i * 4 + i] = 1.0;
    std::vector<double> x = {0.3, -1.2, 5.0, 0.0};
    auto y = forward(net, x);
    for (int i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-15));
}

TEST_CASE("relu layer zeroes all-negative pre-activations") {
    NetSpec spec;
    spec.layers = {{3, 3, Activation::Relu}};
    Mlp net(spec);
    for (int i = 0; i < 3; ++i) net.params[i * 3 + i] = 1.0;
    auto y = forward(net, {-1.0, -0.5, -2.0});
    for (double v : y) CHECK(v == 0.0);
}

TEST_CASE("two-layer forward matches a per-neuron reference") {
    Rng rng(42);
    Mlp net(mlp_spec(5, 7, 9, Activation::Tanh));
    net.init_uniform(rng);
    std::vector<double> probe(5);
    for (auto& v : probe) v = rng.uniform(-2, 2);
    auto fast = forward(net, probe);
    auto ref = naive_forward(net.spec, net.params, probe);
    REQUIRE(fast.size() == ref.size());
    for (size_t i = 0; i < ref.size(); ++i) CHECK(fast[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("batched forward equals per-sample forward") {
    Rng rng(7);
    Mlp net(mlp_spec(6, 8, 9, Activation::Relu));
    net.init_uniform(rng);
    const int B = 5;
    std::vector<double> X(B * 6);
    for (auto& v : X) v = rng.uniform(-1, 1);
    Tape tape;
    forward_batch(net.spec, net.params.data(), X.data(), B, tape);
    for (int r = 0; r < B; ++r) {
        auto single = forward(net, {X.begin() + r * 6, X.begin() + (r + 1) * 6});
        for (int c = 0; c < 9; ++c)
            CHECK(tape.output()[r * 9 + c] == doctest::Approx(single[c]).epsilon(1e-12));
    }
}

TEST_CASE("net spec validation") {
    NetSpec broken;
    broken.layers = {{4, 8, Activation::Relu}, {9, 3, Activation::Identity}};
    CHECK_THROWS_AS(broken.validate(), Error);
    NetSpec degenerate;
    degenerate.layers = {{0, 4, Activation::Relu}};
    CHECK_THROWS_AS(degenerate.validate(), Error);
    CHECK_THROWS_AS(NetSpec{}.validate(), Error);
}

TEST_CASE("uniform logits cost 3 ln 3") {
    double logits[9] = {0};
    double loss = bc_loss(logits, {0, 0, 0}, nullptr);
    CHECK(loss == doctest::Approx(3.0 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("saturated correct logits cost nearly nothing") {
    ActionTriple label{1, -1, 0};
    double logits[9];
    int idx[3] = {label_index(label.ax), label_index(label.ay), label_index(label.atheta)};
    for (int h = 0; h < 3; ++h)
        for (int c = 0; c < 3; ++c) logits[3 * h + c] = c == idx[h] ? 50.0 : -50.0;
    CHECK(bc_loss(logits, label, nullptr) < 1e-10);
}

TEST_CASE("softmax heads are valid distributions and shift-invariant") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        double logits[9], shifted[9];
        for (int i = 0; i < 9; ++i) logits[i] = rng.uniform(-10, 10);
        for (int h = 0; h < 3; ++h) {
            double c = rng.uniform(-100, 100);
            for (int i = 0; i < 3; ++i) shifted[3 * h + i] = logits[3 * h + i] + c;
        }
        auto probs = head_softmax(logits);
        for (const auto& head : probs) {
            double sum = head[0] + head[1] + head[2];
            CHECK(std::abs(sum - 1.0) < 1e-9);
            for (double p : head) CHECK(p >= 0.0);
        }
        ActionTriple label = random_label(rng);
        CHECK(std::abs(bc_loss(logits, label, nullptr) - bc_loss(shifted, label, nullptr)) < 1e-9);
    }
}

TEST_CASE("non-finite logits are rejected") {
    double logits[9] = {0};
    logits[4] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(bc_loss(logits, {0, 0, 0}, nullptr), Error);
}

TEST_CASE("backprop matches central finite differences on 20 random nets") {
    Rng rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
        int in = rng.uniform_int(2, 6);
        int hidden = rng.uniform_int(3, 10);
        // tanh keeps the loss smooth; a relu kink would poison the differences
        Mlp net(mlp_spec(in, hidden, 9, Activation::Tanh));
        net.init_uniform(rng);
        std::vector<double> x(in);
        for (auto& v : x) v = rng.uniform(-1.5, 1.5);
        ActionTriple label = random_label(rng);

        std::vector<double> analytic;
        bc_loss_and_grad(net, x, label, analytic);
        double err = gradcheck_max_rel_err(
            [&]() { return bc_loss(forward(net, x).data(), label, nullptr); }, net.params.data(),
            net.params.size(), analytic.data());
        CHECK(err < 1e-4);
    }
}

TEST_CASE("input gradients agree between full and sliced backward") {
    Rng rng(55);
    const int B = 4, in = 12;
    Mlp net(mlp_spec(in, 6, 9, Activation::Tanh));
    net.init_uniform(rng);
    std::vector<double> X(B * in), dOut(B * 9);
    for (auto& v : X) v = rng.uniform(-1, 1);
    for (auto& v : dOut) v = rng.uniform(-1, 1);
    Tape tape;
    forward_batch(net.spec, net.params.data(), X.data(), B, tape);

    std::vector<double> grad(net.params.size(), 0.0);
    std::vector<double> dXfull(B * in);
    backward_batch(net.spec, net.params.data(), tape, dOut.data(), grad.data(), dXfull.data());

    const int colBegin = 5, colCount = 4;
    std::vector<double> grad2(net.params.size(), 0.0);
    std::vector<double> dXslice(B * colCount);
    backward_batch(net.spec, net.params.data(), tape, dOut.data(), grad2.data(), dXslice.data(),
                   {colBegin, colCount});
    for (int r = 0; r < B; ++r)
        for (int c = 0; c < colCount; ++c)
            CHECK(dXslice[r * colCount + c] ==
                  doctest::Approx(dXfull[r * in + colBegin + c]).epsilon(1e-12));
    for (size_t i = 0; i < grad.size(); ++i) CHECK(grad[i] == doctest::Approx(grad2[i]).epsilon(1e-12));

    CHECK_THROWS_AS(backward_batch(net.spec, net.params.data(), tape, dOut.data(), grad2.data(),
                                   dXslice.data(), {in - 1, 4}),
                    Error);
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
    Rng rng(9);
    const int B = 6, in = 5;
    Mlp net(mlp_spec(in, 7, 9, Activation::Tanh));
    net.init_uniform(rng);
    std::vector<double> X(B * in);
    for (auto& v : X) v = rng.uniform(-1, 1);
    std::vector<ActionTriple> labels;
    for (int i = 0; i < B; ++i) labels.push_back(random_label(rng));

    DenseBcModel model(net, X, labels);
    std::vector<int64_t> all(B);
    for (int i = 0; i < B; ++i) all[i] = i;
    std::vector<double> grad(net.params.size(), 0.0);
    double meanLoss = model.loss_and_grad(all, grad);

    std::vector<double> accum(net.params.size(), 0.0), one;
    double lossSum = 0.0;
    for (int i = 0; i < B; ++i) {
        lossSum += bc_loss_and_grad(net, {X.begin() + i * in, X.begin() + (i + 1) * in}, labels[i], one);
        for (size_t j = 0; j < one.size(); ++j) accum[j] += one[j] / B;
    }
    CHECK(meanLoss == doctest::Approx(lossSum / B).epsilon(1e-12));
    for (size_t j = 0; j < accum.size(); ++j)
        CHECK(grad[j] == doctest::Approx(accum[j]).epsilon(1e-10));
}

TEST_CASE("sgd step") {
    OptState opt;
    opt.algorithm = OptState::Algo::Sgd;
    opt.learningRate = 0.1;
    double p = 1.0, g = 2.0;
    opt.step(&p, &g, 1);
    CHECK(p == doctest::Approx(0.8).epsilon(1e-15));
    g = 0.0;
    opt.step(&p, &g, 1);
    CHECK(p == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("adam first step moves by about the learning rate") {
    OptState opt;
    double p = 5.0, g = 1.0;
    opt.step(&p, &g, 1);
    CHECK(p == doctest::Approx(5.0 - 1e-3).epsilon(1e-6));
    CHECK(opt.stepCount == 1);
}

TEST_CASE("adam with zero gradients from init leaves parameters alone") {
    OptState opt;
    double p = 2.5, g = 0.0;
    for (int i = 0; i < 5; ++i) opt.step(&p, &g, 1);
    CHECK(p == 2.5);
}

TEST_CASE("one sample can be memorized") {
    Rng rng(21);
    Mlp net(mlp_spec(4, 16, 9, Activation::Tanh));
    net.init_uniform(rng);
    std::vector<double> X = {0.5, -0.25, 1.0, 0.75};
    DenseBcModel model(net, X, {ActionTriple{1, 0, -1}});
    TrainHyper hyper;
    hyper.batchSize = 1;
    hyper.epochs = 200;
    hyper.learningRate = 1e-2;
    hyper.seed = 77;
    auto result = train_epochs(model, hyper);
    CHECK(result.epochLoss.back() < 0.01);
}

TEST_CASE("training reduces loss on a separable toy problem") {
    // Labels are the sign pattern of the inputs: exactly the structure the
    // three heads should pick up.
    Rng rng(31);
    const int N = 256, in = 3;
    std::vector<double> X(N * in);
    std::vector<ActionTriple> labels(N);
    for (int i = 0; i < N; ++i) {
        int vals[3];
        for (int a = 0; a < 3; ++a) {
            vals[a] = rng.uniform_int(-1, 1);
            X[i * in + a] = vals[a] + rng.gaussian(0.0, 0.05);
        }
        labels[i] = {vals[0], vals[1], vals[2]};
    }
    Mlp net(mlp_spec(in, 32, 9, Activation::Relu));
    net.init_uniform(rng);
    DenseBcModel model(net, X, labels);
    TrainHyper hyper;
    hyper.epochs = 40;
    hyper.learningRate = 1e-2;
    hyper.seed = 5;
    auto result = train_epochs(model, hyper);
    CHECK(result.epochLoss[19] < result.epochLoss[0]);
    CHECK(result.epochLoss.back() < 0.2);
}

TEST_CASE("training is bit-deterministic under a fixed seed") {
    auto run = [](uint64_t seed) {
        Rng rng(100);
        const int N = 64, in = 4;
        std::vector<double> X(N * in);
        std::vector<ActionTriple> labels(N);
        for (int i = 0; i < N; ++i) {
            for (int a = 0; a < in; ++a) X[i * in + a] = rng.uniform(-1, 1);
            labels[i] = {rng.uniform_int(-1, 1), rng.uniform_int(-1, 1), rng.uniform_int(-1, 1)};
        }
        Mlp net(mlp_spec(in, 8, 9, Activation::Relu));
        net.init_uniform(rng);
        DenseBcModel model(net, X, labels);
        TrainHyper hyper;
        hyper.batchSize = 16;  // several batches per epoch so the shuffle matters
        hyper.epochs = 3;
        hyper.seed = seed;
        train_epochs(model, hyper);
        return net.params;
    };
    auto a = run(9), b = run(9), c = run(10);
    CHECK(a == b);       // bitwise
    CHECK_FALSE(a == c); // shuffles differ
}

TEST_CASE("a diverging run aborts instead of emitting garbage") {
    Rng rng(12);
    Mlp net(mlp_spec(2, 4, 9, Activation::Relu));
    net.init_uniform(rng);
    std::vector<double> X = {1e3, -1e3, 2e3, 0.5};
    DenseBcModel model(net, X, {ActionTriple{0, 0, 0}, ActionTriple{1, 1, 1}});
    TrainHyper hyper;
    hyper.epochs = 50;
    hyper.learningRate = 1e308;  // one step overflows the weights
    hyper.algorithm = OptState::Algo::Sgd;
    hyper.seed = 1;
    CHECK_THROWS_AS(train_epochs(model, hyper), Error);
}
