#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lmnav/metrics.hpp"
#include "lmnav/nn.hpp"
#include "lmnav/sensor.hpp"

// The two action decoders. Both share the same front half — masked feature
// crops pooled to a small token grid per view, plus bounding-box features —
// and differ in how current tokens are related to goal tokens:
//
//   score:     K x K cosine score matrix per view, flattened into the head.
//   attention: current tokens cross-attend to goal tokens, mean-pooled.
//
// Feature grids and masks are frozen inputs; only the box embedding, the
// head, and (for the attention variant) the projection matrices train.

namespace lmnav::decoders {

enum class Variant : uint8_t { Score = 0, Attention = 1 };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct DecoderConfig {
    int poolGrid = 8;    // G: tokens per view = G*G
    int featureDim = 32; // D, must match the rig
    int viewCount = 4;
    int boxHidden = 64;
    int boxDim = 256;    // box embedding width
    int headHidden = 64;
    int attnHeads = 4;
    bool poolMax = false;  // mean pooling unless set
    nn::Activation activation = nn::Activation::Tanh;

    void validate() const;
    int token_count() const { return poolGrid * poolGrid; }  // K
    int box_input_dim() const { return viewCount * 10; }     // (cur 5 + goal 5) per view
    int score_width() const { return viewCount * token_count() * token_count(); }
    int head_input_dim(Variant v) const {
        return (v == Variant::Score ? score_width() : viewCount * featureDim) + boxDim;
    }
    nn::NetSpec box_spec() const;
    nn::NetSpec head_spec(Variant v) const;
};

/// Pooled tokens for one view: (G*G) x D row-major. All-zero tokens encode
/// an absent or fully masked-out object.
struct TokenGrid {
    int G = 0;
    int D = 0;
    std::vector<double> tokens;

    bool all_zero() const;
};

/// Crop the feature grid to the mask's bounding box, zero masked-out patches,
/// and pool the box region onto a G x G cell lattice (mean, or per-component
/// max). Cells with no surviving patch stay zero, as does everything when the
/// object is absent.
TokenGrid crop_mask_pool(const sensor::FeatureGrid& grid, const sensor::SegmentationResult& seg,
                         int G, bool poolMax = false);

/// d(loss)/d(grid) for the pool above. dTokens matches the TokenGrid layout;
/// dGrid (H*W*D, caller-zeroed) receives the result. Max pooling routes each
/// component's gradient to the first patch attaining the max.
void crop_mask_pool_backward(const sensor::FeatureGrid& grid,
                             const sensor::SegmentationResult& seg, int G, bool poolMax,
                             const TokenGrid& dTokens, std::vector<double>& dGrid);

struct ScoreMatrixResult {
    int K = 0;
    std::vector<double> scores;  // K x K, row = current token, col = goal token
};

/// Pairwise cosine similarity; any zero token yields exactly 0 in its row or
/// column. Entries clamped to [-1, 1] against rounding spill.
ScoreMatrixResult score_matrix(const TokenGrid& cur, const TokenGrid& goal);

/// Backward of score_matrix: accumulates into dCur/dGoal (token layout,
/// caller-zeroed). Either output may be null.
void score_matrix_backward(const TokenGrid& cur, const TokenGrid& goal, const double* dScores,
                           std::vector<double>* dCur, std::vector<double>* dGoal);

/// Per-view (uMin, vMin, uMax, vMax, present) for current then goal role,
/// view-major. Absent boxes contribute five zeros.
std::vector<double> box_feature(const std::vector<sensor::SegmentationResult>& curSegs,
                                const std::vector<sensor::SegmentationResult>& goalSegs);

struct ViewAuxStats {
    double bboxArea = 0.0;
    bool present = false;
    bool comValid = false;
    metrics::ComPoint com;
};

struct PolicyOutput {
    std::array<double, 9> logits{};
    std::vector<ViewAuxStats> auxStats;  // per view, from the current segs
};

/// Bounding-box area and mask CoM per view — the auxiliary-stop inputs.
std::vector<ViewAuxStats> view_aux_stats(const std::vector<sensor::SegmentationResult>& segs);

/// Flat trainable parameters for one decoder. Layout: for the attention
/// variant, Wq | Wk | Wv | Wo (each D x D, shared across views) first; then
/// box MLP, then head MLP, in nn layer order.
struct DecoderParams {
    Variant variant = Variant::Score;
    DecoderConfig cfg;
    std::vector<double> flat;

    size_t attn_matrix_size() const {
        return static_cast<size_t>(cfg.featureDim) * cfg.featureDim;
    }
    size_t attn_param_count() const {
        return variant == Variant::Attention ? 4 * attn_matrix_size() : 0;
    }
    size_t attn_offset(int which) const;  // 0=Wq 1=Wk 2=Wv 3=Wo
    size_t box_offset() const { return attn_param_count(); }
    size_t head_offset() const { return box_offset() + cfg.box_spec().param_count(); }
    size_t param_count() const { return head_offset() + cfg.head_spec(variant).param_count(); }

    void allocate();
    void init(Rng& rng);
};

/// One observation reduced to what the decoders consume.
struct PreparedObs {
    std::vector<TokenGrid> tokens;                 // per view
    std::vector<sensor::SegmentationResult> segs;  // the masks the tokens came from
};

PreparedObs prepare_obs(const sensor::ObservationSet& obs,
                        const std::vector<sensor::SegmentationResult>& segs,
                        const DecoderConfig& cfg);

/// Full decoder forward for one (current, goal) pair.
PolicyOutput decoder_forward(const DecoderParams& params, const PreparedObs& cur,
                             const PreparedObs& goal);

/// Loss + gradient for a single labeled pair; used by the gradient checks.
/// gradFlat is resized and zeroed. When dCur/dGoal are non-null they receive
/// per-view token gradients (same shape as the inputs' tokens).
double decoder_loss_and_grad(const DecoderParams& params, const PreparedObs& cur,
                             const PreparedObs& goal, const world::ActionTriple& label,
                             std::vector<double>& gradFlat,
                             std::vector<std::vector<double>>* dCurTokens = nullptr,
                             std::vector<std::vector<double>>* dGoalTokens = nullptr);

/// Pooled observations packed for training: tokens, their inverse norms, and
/// the per-view box row, indexed densely by observation id.
struct PooledStore {
    DecoderConfig cfg;
    size_t count = 0;
    std::vector<double> tokens;   // count x viewCount x K x D
    std::vector<double> invNorm;  // count x viewCount x K
    std::vector<double> box5;     // count x viewCount x 5

    size_t tokens_stride() const {
        return static_cast<size_t>(cfg.viewCount) * cfg.token_count() * cfg.featureDim;
    }
    size_t norm_stride() const { return static_cast<size_t>(cfg.viewCount) * cfg.token_count(); }
    void append(const PreparedObs& obs);
    const double* obs_tokens(size_t i) const { return tokens.data() + i * tokens_stride(); }
    const double* obs_norms(size_t i) const { return invNorm.data() + i * norm_stride(); }
    const double* obs_box(size_t i) const { return box5.data() + i * cfg.viewCount * 5; }
};

/// One training pair: current and goal observation ids plus the action label.
struct PairSample {
    int64_t curObs = 0;
    int64_t goalObs = 0;
    world::ActionTriple label;
};

/// Mini-batch trainer for either variant over a PooledStore.
class DecoderTrainer : public nn::BatchModel {
public:
    DecoderTrainer(DecoderParams& params, const PooledStore& store,
                   std::vector<PairSample> samples);

    size_t sample_count() const override { return samples_.size(); }
    size_t param_count() const override { return params_.flat.size(); }
    double* param_data() override { return params_.flat.data(); }
    double loss_and_grad(const std::vector<int64_t>& batch, std::vector<double>& grad) override;

private:
    double score_batch(const std::vector<int64_t>& batch, std::vector<double>& grad);
    double attention_batch(const std::vector<int64_t>& batch, std::vector<double>& grad);

    DecoderParams& params_;
    const PooledStore& store_;
    std::vector<PairSample> samples_;
    // scratch reused across batches
    std::vector<double> xbox_, xhead_, dlogits_, debox_, dxhead_, attnScratch_;
    nn::Tape boxTape_, headTape_;
};

}  // namespace lmnav::decoders
