#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "lmnav/common.hpp"
#include "lmnav/geometry.hpp"
#include "lmnav/rng.hpp"

// Dense-network machinery for the decoders: batched forward/backward over
// flat parameter vectors, the three-head action loss, SGD/Adam, and a
// mini-batch training loop. All training math is double precision; only
// checkpoints on disk narrow to float.

namespace lmnav::nn {

enum class Activation : uint8_t { Identity = 0, Relu = 1, Tanh = 2 };

struct LayerSpec {
    int inputDim = 0;
    int outputDim = 0;
    Activation activation = Activation::Identity;
};

struct NetSpec {
    std::vector<LayerSpec> layers;

    void validate() const;  // dims >= 1, adjacent dims chain
    int input_dim() const;
    int output_dim() const;
    size_t param_count() const;
    // Offsets into the flat parameter vector. Layout per layer: weight
    // (outputDim x inputDim row-major) followed by bias (outputDim).
    size_t weight_offset(int layer) const;
    size_t bias_offset(int layer) const;
};

/// Convenience for a 2-layer net in -> hidden(act) -> out(identity).
NetSpec mlp_spec(int in, int hidden, int out, Activation hiddenAct = Activation::Relu);

struct Mlp {
    NetSpec spec;
    std::vector<double> params;

    Mlp() = default;
    explicit Mlp(NetSpec s);
    void init_uniform(Rng& rng);  // per layer, uniform in +-sqrt(6/(fanIn+fanOut))
};

/// Cached activations from a batched forward pass. `input` aliases the X the
/// caller passed; it must stay alive until backward.
struct Tape {
    int batch = 0;
    const double* input = nullptr;
    std::vector<std::vector<double>> pre;  // per layer, batch x outputDim
    std::vector<std::vector<double>> act;  // per layer, batch x outputDim

    const double* output() const { return act.back().data(); }
};

/// Y = net(X) for X of shape batch x inputDim (row-major).
void forward_batch(const NetSpec& spec, const double* params, const double* X, int batch,
                   Tape& tape);

/// Which input columns backward should produce gradients for (count -1 = all).
/// Restricting the slice skips most of the widest gemm when only a few input
/// columns feed from upstream parameters.
struct InputGradSlice {
    int colBegin = 0;
    int colCount = -1;
};

/// Backpropagate dOut (batch x outputDim) through the tape. Parameter
/// gradients are accumulated into gradParams (caller zeroes). If dX is
/// non-null it receives the input gradient, batch x slice.colCount row-major.
void backward_batch(const NetSpec& spec, const double* params, const Tape& tape,
                    const double* dOut, double* gradParams, double* dX = nullptr,
                    InputGradSlice slice = {});

/// Single-sample forward; tape optional.
std::vector<double> forward(const Mlp& net, const std::vector<double>& input,
                            Tape* tape = nullptr);

/// Action component {-1,0,+1} -> class index {0,1,2}.
int label_index(int component);

/// Negative log-likelihood of `label` under three 3-class softmax heads over
/// 9 logits. If dLogits is non-null, the gradient (softmax - onehot) is
/// written there. Throws on non-finite logits.
double bc_loss(const double* logits, const world::ActionTriple& label, double* dLogits);

/// Per-head softmax probabilities for 9 logits (shift-stabilized).
std::array<std::array<double, 3>, 3> head_softmax(const double* logits);

/// Loss + full parameter gradient for one sample through `net`.
double bc_loss_and_grad(const Mlp& net, const std::vector<double>& input,
                        const world::ActionTriple& label, std::vector<double>& gradParams);

struct OptState {
    enum class Algo : uint8_t { Sgd = 0, Adam = 1 };
    Algo algorithm = Algo::Adam;
    double learningRate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int64_t stepCount = 0;
    std::vector<double> m, v;  // Adam moments, sized lazily

    void step(double* params, const double* grads, size_t n);
};

struct TrainHyper {
    int batchSize = 64;
    int epochs = 30;
    double learningRate = 1e-3;
    OptState::Algo algorithm = OptState::Algo::Adam;
    uint64_t seed = 0;
};

/// Anything the mini-batch loop can train: a flat parameter vector plus a
/// mean loss/gradient over an index batch.
class BatchModel {
public:
    virtual ~BatchModel() = default;
    virtual size_t sample_count() const = 0;
    virtual size_t param_count() const = 0;
    virtual double* param_data() = 0;
    /// Mean loss over the batch; grad (same size as params, pre-zeroed by the
    /// caller) receives the mean gradient.
    virtual double loss_and_grad(const std::vector<int64_t>& batch, std::vector<double>& grad) = 0;
};

struct TrainResult {
    std::vector<double> epochLoss;  // mean loss per epoch
};

/// Seeded shuffled mini-batches, mean-reduced gradients, one optimizer step
/// per batch. Batch index lists are sorted so the reduction order is fixed.
/// Throws Error if the loss goes non-finite.
TrainResult train_epochs(BatchModel& model, const TrainHyper& hyper);

/// BatchModel over fixed feature rows X (n x inputDim) with action labels.
class DenseBcModel : public BatchModel {
public:
    DenseBcModel(Mlp& net, const std::vector<double>& X, std::vector<world::ActionTriple> labels);

    size_t sample_count() const override { return labels_.size(); }
    size_t param_count() const override { return net_.params.size(); }
    double* param_data() override { return net_.params.data(); }
    double loss_and_grad(const std::vector<int64_t>& batch, std::vector<double>& grad) override;

private:
    Mlp& net_;
    const std::vector<double>& X_;
    std::vector<world::ActionTriple> labels_;
    std::vector<double> xb_, dlogits_;
    Tape tape_;
};

/// Max relative error between an analytic gradient and central finite
/// differences of `lossAt` (h on each parameter in turn). Denominators are
/// floored so near-zero pairs cannot blow up the ratio.
double gradcheck_max_rel_err(const std::function<double()>& lossAt, double* params, size_t n,
                             const double* analytic, double h = 1e-5);

}  // namespace lmnav::nn
