#include "lmnav/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "lmnav/kernels.hpp"

namespace lmnav::nn {

void NetSpec::validate() const {
    if (layers.empty()) throw Error("NetSpec: no layers");
    for (size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].inputDim < 1 || layers[i].outputDim < 1)
            throw Error("NetSpec: layer dims must be >= 1");
        if (i > 0 && layers[i].inputDim != layers[i - 1].outputDim)
            throw Error("NetSpec: adjacent layer dims do not chain");
    }
}

int NetSpec::input_dim() const { return layers.front().inputDim; }
int NetSpec::output_dim() const { return layers.back().outputDim; }

size_t NetSpec::param_count() const {
    size_t n = 0;
    for (const auto& l : layers)
        n += static_cast<size_t>(l.outputDim) * l.inputDim + l.outputDim;
    return n;
}

size_t NetSpec::weight_offset(int layer) const {
    size_t off = 0;
    for (int i = 0; i < layer; ++i)
        off += static_cast<size_t>(layers[i].outputDim) * layers[i].inputDim + layers[i].outputDim;
    return off;
}

size_t NetSpec::bias_offset(int layer) const {
    return weight_offset(layer) +
           static_cast<size_t>(layers[layer].outputDim) * layers[layer].inputDim;
}

NetSpec mlp_spec(int in, int hidden, int out, Activation hiddenAct) {
    NetSpec s;
    s.layers = {{in, hidden, hiddenAct}, {hidden, out, Activation::Identity}};
    s.validate();
    return s;
}

Mlp::Mlp(NetSpec s) : spec(std::move(s)) {
    spec.validate();
    params.assign(spec.param_count(), 0.0);
}

void Mlp::init_uniform(Rng& rng) {
    for (size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& layer = spec.layers[l];
        double bound = std::sqrt(6.0 / (layer.inputDim + layer.outputDim));
        double* w = params.data() + spec.weight_offset(static_cast<int>(l));
        size_t n = static_cast<size_t>(layer.outputDim) * layer.inputDim;
        for (size_t i = 0; i < n; ++i) w[i] = rng.uniform(-bound, bound);
        // biases start at zero
        std::fill_n(params.data() + spec.bias_offset(static_cast<int>(l)), layer.outputDim, 0.0);
    }
}

namespace {

void apply_activation(Activation act, const double* pre, double* out, size_t n) {
    switch (act) {
        case Activation::Identity:
            if (out != pre) std::memcpy(out, pre, n * sizeof(double));
            break;
        case Activation::Relu:
            for (size_t i = 0; i < n; ++i) out[i] = pre[i] > 0.0 ? pre[i] : 0.0;
            break;
        case Activation::Tanh:
            for (size_t i = 0; i < n; ++i) out[i] = std::tanh(pre[i]);
            break;
    }
}

// dPre = dAct * act'(pre), in place on dAct.
void activation_backward(Activation act, const double* pre, const double* actOut, double* dAct,
                         size_t n) {
    switch (act) {
        case Activation::Identity:
            break;
        case Activation::Relu:
            for (size_t i = 0; i < n; ++i)
                if (pre[i] <= 0.0) dAct[i] = 0.0;
            break;
        case Activation::Tanh:
            for (size_t i = 0; i < n; ++i) dAct[i] *= 1.0 - actOut[i] * actOut[i];
            break;
    }
}

}  // namespace

void forward_batch(const NetSpec& spec, const double* params, const double* X, int batch,
                   Tape& tape) {
    if (batch < 1) throw Error("forward_batch: empty batch");
    size_t layerCount = spec.layers.size();
    tape.batch = batch;
    tape.input = X;
    tape.pre.resize(layerCount);
    tape.act.resize(layerCount);

    const double* cur = X;
    for (size_t l = 0; l < layerCount; ++l) {
        const auto& layer = spec.layers[l];
        size_t rows = static_cast<size_t>(batch);
        size_t outN = rows * layer.outputDim;
        tape.pre[l].resize(outN);
        tape.act[l].resize(outN);
        const double* W = params + spec.weight_offset(static_cast<int>(l));
        const double* b = params + spec.bias_offset(static_cast<int>(l));
        // pre = cur * W^T
        kern::gemm_nt(rows, layer.outputDim, layer.inputDim, cur, layer.inputDim, W,
                      layer.inputDim, tape.pre[l].data(), layer.outputDim, false);
        for (size_t r = 0; r < rows; ++r) {
            double* row = tape.pre[l].data() + r * layer.outputDim;
            for (int c = 0; c < layer.outputDim; ++c) row[c] += b[c];
        }
        apply_activation(layer.activation, tape.pre[l].data(), tape.act[l].data(), outN);
        cur = tape.act[l].data();
    }
}

void backward_batch(const NetSpec& spec, const double* params, const Tape& tape,
                    const double* dOut, double* gradParams, double* dX, InputGradSlice slice) {
    int batch = tape.batch;
    if (batch < 1) throw Error("backward_batch: tape has no forward pass");
    int layerCount = static_cast<int>(spec.layers.size());

    // dCur holds the gradient w.r.t. the current layer's activation output.
    std::vector<double> dCur(dOut, dOut + static_cast<size_t>(batch) * spec.output_dim());
    std::vector<double> dPrev;

    for (int l = layerCount - 1; l >= 0; --l) {
        const auto& layer = spec.layers[l];
        size_t rows = static_cast<size_t>(batch);
        activation_backward(layer.activation, tape.pre[l].data(), tape.act[l].data(), dCur.data(),
                            rows * layer.outputDim);
        const double* below = l == 0 ? tape.input : tape.act[l - 1].data();
        double* dW = gradParams + spec.weight_offset(l);
        double* db = gradParams + spec.bias_offset(l);
        // dW += dPre^T * below
        kern::gemm_tn(layer.outputDim, layer.inputDim, rows, dCur.data(), layer.outputDim, below,
                      layer.inputDim, dW, layer.inputDim, true);
        for (size_t r = 0; r < rows; ++r) {
            const double* row = dCur.data() + r * layer.outputDim;
            for (int c = 0; c < layer.outputDim; ++c) db[c] += row[c];
        }

        const double* W = params + spec.weight_offset(l);
        if (l > 0) {
            // dBelow = dPre * W
            dPrev.resize(rows * layer.inputDim);
            kern::gemm_nn(rows, layer.inputDim, layer.outputDim, dCur.data(), layer.outputDim, W,
                          layer.inputDim, dPrev.data(), layer.inputDim, false);
            dCur.swap(dPrev);
        } else if (dX != nullptr) {
            int colBegin = slice.colBegin;
            int colCount = slice.colCount < 0 ? layer.inputDim : slice.colCount;
            if (colBegin < 0 || colBegin + colCount > layer.inputDim)
                throw Error("backward_batch: input grad slice out of range");
            kern::gemm_nn(rows, colCount, layer.outputDim, dCur.data(), layer.outputDim,
                          W + colBegin, layer.inputDim, dX, colCount, false);
        }
    }
}

std::vector<double> forward(const Mlp& net, const std::vector<double>& input, Tape* tape) {
    if (static_cast<int>(input.size()) != net.spec.input_dim())
        throw Error("forward: input dim mismatch");
    Tape local;
    Tape& t = tape ? *tape : local;
    forward_batch(net.spec, net.params.data(), input.data(), 1, t);
    return {t.output(), t.output() + net.spec.output_dim()};
}

int label_index(int component) {
    if (component < -1 || component > 1) throw Error("label_index: component outside {-1,0,+1}");
    return component + 1;
}

std::array<std::array<double, 3>, 3> head_softmax(const double* logits) {
    std::array<std::array<double, 3>, 3> out;
    for (int h = 0; h < 3; ++h) {
        const double* z = logits + 3 * h;
        if (!std::isfinite(z[0]) || !std::isfinite(z[1]) || !std::isfinite(z[2]))
            throw Error("head_softmax: non-finite logit");
        double mx = std::max({z[0], z[1], z[2]});
        double e0 = std::exp(z[0] - mx), e1 = std::exp(z[1] - mx), e2 = std::exp(z[2] - mx);
        double s = e0 + e1 + e2;
        out[h] = {e0 / s, e1 / s, e2 / s};
    }
    return out;
}

double bc_loss(const double* logits, const world::ActionTriple& label, double* dLogits) {
    auto probs = head_softmax(logits);
    int idx[3] = {label_index(label.ax), label_index(label.ay), label_index(label.atheta)};
    double loss = 0.0;
    for (int h = 0; h < 3; ++h) {
        double p = probs[h][idx[h]];
        loss -= std::log(std::max(p, std::numeric_limits<double>::min()));
        if (dLogits) {
            for (int c = 0; c < 3; ++c) dLogits[3 * h + c] = probs[h][c] - (c == idx[h] ? 1.0 : 0.0);
        }
    }
    return loss;
}

double bc_loss_and_grad(const Mlp& net, const std::vector<double>& input,
                        const world::ActionTriple& label, std::vector<double>& gradParams) {
    if (net.spec.output_dim() != 9) throw Error("bc_loss_and_grad: network must emit 9 logits");
    gradParams.assign(net.params.size(), 0.0);
    Tape tape;
    forward_batch(net.spec, net.params.data(), input.data(), 1, tape);
    double dLogits[9];
    double loss = bc_loss(tape.output(), label, dLogits);
    backward_batch(net.spec, net.params.data(), tape, dLogits, gradParams.data());
    return loss;
}

void OptState::step(double* params, const double* grads, size_t n) {
    stepCount++;
    if (algorithm == Algo::Sgd) {
        kern::axpy(params, -learningRate, grads, n);
        return;
    }
    if (m.size() != n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(stepCount));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(stepCount));
    for (size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        double mh = m[i] / c1;
        double vh = v[i] / c2;
        params[i] -= learningRate * mh / (std::sqrt(vh) + epsilon);
    }
}

TrainResult train_epochs(BatchModel& model, const TrainHyper& hyper) {
    size_t n = model.sample_count();
    if (n == 0) throw Error("train_epochs: empty dataset");
    if (hyper.batchSize < 1 || hyper.epochs < 1)
        throw Error("train_epochs: batchSize and epochs must be >= 1");

    OptState opt;
    opt.algorithm = hyper.algorithm;
    opt.learningRate = hyper.learningRate;

    Rng rng(derive_seed(hyper.seed, "train"));
    std::vector<int64_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<int64_t>(i);

    std::vector<double> grad(model.param_count());
    std::vector<int64_t> batch;
    TrainResult result;
    result.epochLoss.reserve(hyper.epochs);

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        double lossSum = 0.0;
        for (size_t begin = 0; begin < n; begin += hyper.batchSize) {
            size_t end = std::min(n, begin + hyper.batchSize);
            batch.assign(order.begin() + begin, order.begin() + end);
            std::sort(batch.begin(), batch.end());
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss = model.loss_and_grad(batch, grad);
            if (!std::isfinite(loss))
                throw Error("train_epochs: non-finite loss at epoch " + std::to_string(epoch) +
                            " batch offset " + std::to_string(begin));
            opt.step(model.param_data(), grad.data(), grad.size());
            lossSum += loss * static_cast<double>(batch.size());
        }
        result.epochLoss.push_back(lossSum / static_cast<double>(n));
    }
    return result;
}

DenseBcModel::DenseBcModel(Mlp& net, const std::vector<double>& X,
                           std::vector<world::ActionTriple> labels)
    : net_(net), X_(X), labels_(std::move(labels)) {
    if (net_.spec.output_dim() != 9) throw Error("DenseBcModel: network must emit 9 logits");
    if (labels_.empty()) throw Error("DenseBcModel: no samples");
    if (X_.size() != labels_.size() * static_cast<size_t>(net_.spec.input_dim()))
        throw Error("DenseBcModel: feature matrix size mismatch");
}

double DenseBcModel::loss_and_grad(const std::vector<int64_t>& batch, std::vector<double>& grad) {
    size_t bs = batch.size();
    int inDim = net_.spec.input_dim();
    xb_.resize(bs * inDim);
    for (size_t i = 0; i < bs; ++i)
        std::memcpy(xb_.data() + i * inDim, X_.data() + batch[i] * inDim, inDim * sizeof(double));
    forward_batch(net_.spec, net_.params.data(), xb_.data(), static_cast<int>(bs), tape_);
    dlogits_.assign(bs * 9, 0.0);
    double lossSum = 0.0;
    for (size_t i = 0; i < bs; ++i)
        lossSum += bc_loss(tape_.output() + i * 9, labels_[batch[i]], dlogits_.data() + i * 9);
    double inv = 1.0 / static_cast<double>(bs);
    for (auto& g : dlogits_) g *= inv;
    backward_batch(net_.spec, net_.params.data(), tape_, dlogits_.data(), grad.data());
    return lossSum * inv;
}

double gradcheck_max_rel_err(const std::function<double()>& lossAt, double* params, size_t n,
                             const double* analytic, double h) {
    double worst = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double saved = params[i];
        params[i] = saved + h;
        double up = lossAt();
        params[i] = saved - h;
        double down = lossAt();
        params[i] = saved;
        double fd = (up - down) / (2.0 * h);
        double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-4});
        worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
    }
    return worst;
}

}  // namespace lmnav::nn
