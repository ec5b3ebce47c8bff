#include "lmnav/decoders.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "lmnav/kernels.hpp"

namespace lmnav::decoders {

const char* variant_name(Variant v) { return v == Variant::Score ? "score" : "attention"; }

Variant variant_from_name(const std::string& name) {
    if (name == "score") return Variant::Score;
    if (name == "attention") return Variant::Attention;
    throw Error("unknown decoder variant: " + name);
}

void DecoderConfig::validate() const {
    if (poolGrid < 1 || featureDim < 1 || viewCount < 1) throw Error("DecoderConfig: bad dims");
    if (boxHidden < 1 || boxDim < 1 || headHidden < 1) throw Error("DecoderConfig: bad MLP dims");
    if (attnHeads < 1 || featureDim % attnHeads != 0)
        throw Error("DecoderConfig: attnHeads must divide featureDim");
}

nn::NetSpec DecoderConfig::box_spec() const {
    return nn::mlp_spec(box_input_dim(), boxHidden, boxDim, activation);
}

nn::NetSpec DecoderConfig::head_spec(Variant v) const {
    return nn::mlp_spec(head_input_dim(v), headHidden, 9, activation);
}

bool TokenGrid::all_zero() const {
    for (double t : tokens)
        if (t != 0.0) return false;
    return true;
}

namespace {

struct BoxCells {
    int rMin = 0, rMax = -1, cMin = 0, cMax = -1;
    bool any() const { return rMax >= rMin && cMax >= cMin; }
};

BoxCells mask_bounds(const sensor::SegmentationResult& seg) {
    BoxCells b;
    b.rMin = seg.gridH;
    b.cMin = seg.gridW;
    for (int r = 0; r < seg.gridH; ++r)
        for (int c = 0; c < seg.gridW; ++c)
            if (seg.cell(r, c)) {
                b.rMin = std::min(b.rMin, r);
                b.rMax = std::max(b.rMax, r);
                b.cMin = std::min(b.cMin, c);
                b.cMax = std::max(b.cMax, c);
            }
    return b;
}

}  // namespace

TokenGrid crop_mask_pool(const sensor::FeatureGrid& grid, const sensor::SegmentationResult& seg,
                         int G, bool poolMax) {
    if (G < 1) throw Error("crop_mask_pool: G must be >= 1");
    int H = seg.gridH, W = seg.gridW, D = 0;
    if (H < 1 || W < 1) throw Error("crop_mask_pool: segmentation has no grid shape");
    D = static_cast<int>(grid.data.size()) / (H * W);
    if (static_cast<size_t>(H) * W * D != grid.data.size())
        throw Error("crop_mask_pool: feature grid shape mismatch");

    TokenGrid out;
    out.G = G;
    out.D = D;
    out.tokens.assign(static_cast<size_t>(G) * G * D, 0.0);
    if (!seg.present) return out;
    BoxCells box = mask_bounds(seg);
    if (!box.any()) return out;

    int boxH = box.rMax - box.rMin + 1;
    int boxW = box.cMax - box.cMin + 1;
    std::vector<int> count(static_cast<size_t>(G) * G, 0);
    for (int r = box.rMin; r <= box.rMax; ++r) {
        for (int c = box.cMin; c <= box.cMax; ++c) {
            if (!seg.cell(r, c)) continue;
            int cr = (r - box.rMin) * G / boxH;
            int cc = (c - box.cMin) * G / boxW;
            size_t cell = static_cast<size_t>(cr) * G + cc;
            double* tok = out.tokens.data() + cell * D;
            const float* feat = grid.data.data() + (static_cast<size_t>(r) * W + c) * D;
            if (count[cell] == 0) {
                for (int d = 0; d < D; ++d) tok[d] = feat[d];
            } else if (poolMax) {
                for (int d = 0; d < D; ++d) tok[d] = std::max(tok[d], static_cast<double>(feat[d]));
            } else {
                for (int d = 0; d < D; ++d) tok[d] += feat[d];
            }
            count[cell]++;
        }
    }
    if (!poolMax) {
        for (size_t cell = 0; cell < count.size(); ++cell) {
            if (count[cell] > 1) {
                double inv = 1.0 / count[cell];
                double* tok = out.tokens.data() + cell * D;
                for (int d = 0; d < D; ++d) tok[d] *= inv;
            }
        }
    }
    return out;
}

void crop_mask_pool_backward(const sensor::FeatureGrid& grid,
                             const sensor::SegmentationResult& seg, int G, bool poolMax,
                             const TokenGrid& dTokens, std::vector<double>& dGrid) {
    int H = seg.gridH, W = seg.gridW, D = dTokens.D;
    if (dGrid.size() != static_cast<size_t>(H) * W * D)
        throw Error("crop_mask_pool_backward: dGrid shape mismatch");
    if (!seg.present) return;
    BoxCells box = mask_bounds(seg);
    if (!box.any()) return;
    int boxH = box.rMax - box.rMin + 1;
    int boxW = box.cMax - box.cMin + 1;

    // Recover cell membership in the same scan order as the forward pass.
    std::vector<std::vector<int>> members(static_cast<size_t>(G) * G);
    for (int r = box.rMin; r <= box.rMax; ++r)
        for (int c = box.cMin; c <= box.cMax; ++c)
            if (seg.cell(r, c)) {
                int cr = (r - box.rMin) * G / boxH;
                int cc = (c - box.cMin) * G / boxW;
                members[static_cast<size_t>(cr) * G + cc].push_back(r * W + c);
            }

    for (size_t cell = 0; cell < members.size(); ++cell) {
        const auto& patches = members[cell];
        if (patches.empty()) continue;
        const double* dTok = dTokens.tokens.data() + cell * D;
        if (!poolMax) {
            double inv = 1.0 / static_cast<double>(patches.size());
            for (int p : patches) {
                double* g = dGrid.data() + static_cast<size_t>(p) * D;
                for (int d = 0; d < D; ++d) g[d] += dTok[d] * inv;
            }
        } else {
            for (int d = 0; d < D; ++d) {
                int best = patches[0];
                double bestVal = grid.data[static_cast<size_t>(patches[0]) * D + d];
                for (size_t i = 1; i < patches.size(); ++i) {
                    double v = grid.data[static_cast<size_t>(patches[i]) * D + d];
                    if (v > bestVal) {
                        bestVal = v;
                        best = patches[i];
                    }
                }
                dGrid[static_cast<size_t>(best) * D + d] += dTok[d];
            }
        }
    }
}

namespace {

// 1/|token| per token, exactly 0 for all-zero tokens.
void inverse_norms(const TokenGrid& t, double* out) {
    int K = t.G * t.G;
    for (int i = 0; i < K; ++i) {
        const double* tok = t.tokens.data() + static_cast<size_t>(i) * t.D;
        double n2 = kern::dot(tok, tok, t.D);
        out[i] = n2 > 0.0 ? 1.0 / std::sqrt(n2) : 0.0;
    }
}

// Raw dot products scaled by inverse norms, clamped into [-1, 1].
void cosine_from_dots(double* s, int K, const double* invA, const double* invB) {
    for (int i = 0; i < K; ++i) {
        double ia = invA[i];
        double* row = s + static_cast<size_t>(i) * K;
        if (ia == 0.0) {
            std::fill_n(row, K, 0.0);
            continue;
        }
        for (int j = 0; j < K; ++j)
            row[j] = invB[j] == 0.0 ? 0.0 : std::clamp(row[j] * ia * invB[j], -1.0, 1.0);
    }
}

}  // namespace

ScoreMatrixResult score_matrix(const TokenGrid& cur, const TokenGrid& goal) {
    if (cur.G != goal.G || cur.D != goal.D) throw Error("score_matrix: shape mismatch");
    int K = cur.G * cur.G;
    ScoreMatrixResult out;
    out.K = K;
    out.scores.resize(static_cast<size_t>(K) * K);
    std::vector<double> invA(K), invB(K);
    inverse_norms(cur, invA.data());
    inverse_norms(goal, invB.data());
    kern::gemm_nt(K, K, cur.D, cur.tokens.data(), cur.D, goal.tokens.data(), goal.D,
                  out.scores.data(), K, false);
    cosine_from_dots(out.scores.data(), K, invA.data(), invB.data());
    return out;
}

void score_matrix_backward(const TokenGrid& cur, const TokenGrid& goal, const double* dScores,
                           std::vector<double>* dCur, std::vector<double>* dGoal) {
    int K = cur.G * cur.G, D = cur.D;
    std::vector<double> invA(K), invB(K);
    inverse_norms(cur, invA.data());
    inverse_norms(goal, invB.data());
    std::vector<double> dots(static_cast<size_t>(K) * K);
    kern::gemm_nt(K, K, D, cur.tokens.data(), D, goal.tokens.data(), D, dots.data(), K, false);

    // cos = d * a * b with a = 1/|x|, b = 1/|y|:
    //   dcos/dx = a b (y - d a^2 x),  dcos/dy = a b (x - d b^2 y)
    for (int i = 0; i < K; ++i) {
        if (invA[i] == 0.0) continue;
        const double* x = cur.tokens.data() + static_cast<size_t>(i) * D;
        for (int j = 0; j < K; ++j) {
            if (invB[j] == 0.0) continue;
            double g = dScores[static_cast<size_t>(i) * K + j];
            if (g == 0.0) continue;
            const double* y = goal.tokens.data() + static_cast<size_t>(j) * D;
            double d = dots[static_cast<size_t>(i) * K + j];
            double ab = invA[i] * invB[j];
            if (dCur) {
                double* out = dCur->data() + static_cast<size_t>(i) * D;
                double cx = d * invA[i] * invA[i];
                for (int k = 0; k < D; ++k) out[k] += g * ab * (y[k] - cx * x[k]);
            }
            if (dGoal) {
                double* out = dGoal->data() + static_cast<size_t>(j) * D;
                double cy = d * invB[j] * invB[j];
                for (int k = 0; k < D; ++k) out[k] += g * ab * (x[k] - cy * y[k]);
            }
        }
    }
}

namespace {

void box_row(const sensor::SegmentationResult& seg, double* out5) {
    if (seg.present) {
        out5[0] = seg.uMin;
        out5[1] = seg.vMin;
        out5[2] = seg.uMax;
        out5[3] = seg.vMax;
        out5[4] = 1.0;
    } else {
        std::fill_n(out5, 5, 0.0);
    }
}

}  // namespace

std::vector<double> box_feature(const std::vector<sensor::SegmentationResult>& curSegs,
                                const std::vector<sensor::SegmentationResult>& goalSegs) {
    if (curSegs.size() != goalSegs.size()) throw Error("box_feature: view count mismatch");
    std::vector<double> out(curSegs.size() * 10);
    for (size_t v = 0; v < curSegs.size(); ++v) {
        box_row(curSegs[v], out.data() + v * 10);
        box_row(goalSegs[v], out.data() + v * 10 + 5);
    }
    return out;
}

std::vector<ViewAuxStats> view_aux_stats(const std::vector<sensor::SegmentationResult>& segs) {
    std::vector<ViewAuxStats> out(segs.size());
    for (size_t v = 0; v < segs.size(); ++v) {
        out[v].present = segs[v].present;
        out[v].bboxArea = segs[v].bbox_area();
        if (segs[v].set_cells() > 0) {
            out[v].comValid = true;
            out[v].com = metrics::mask_com(segs[v]);
        }
    }
    return out;
}

size_t DecoderParams::attn_offset(int which) const {
    if (variant != Variant::Attention) throw Error("attn_offset: not an attention decoder");
    return static_cast<size_t>(which) * attn_matrix_size();
}

void DecoderParams::allocate() {
    cfg.validate();
    flat.assign(param_count(), 0.0);
}

namespace {

void init_layers(const nn::NetSpec& spec, double* params, Rng& rng) {
    for (size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& layer = spec.layers[l];
        double bound = std::sqrt(6.0 / (layer.inputDim + layer.outputDim));
        double* w = params + spec.weight_offset(static_cast<int>(l));
        size_t n = static_cast<size_t>(layer.outputDim) * layer.inputDim;
        for (size_t i = 0; i < n; ++i) w[i] = rng.uniform(-bound, bound);
        std::fill_n(params + spec.bias_offset(static_cast<int>(l)), layer.outputDim, 0.0);
    }
}

}  // namespace

void DecoderParams::init(Rng& rng) {
    allocate();
    if (variant == Variant::Attention) {
        int D = cfg.featureDim;
        double bound = std::sqrt(6.0 / (D + D));
        for (size_t i = 0; i < 4 * attn_matrix_size(); ++i) flat[i] = rng.uniform(-bound, bound);
    }
    init_layers(cfg.box_spec(), flat.data() + box_offset(), rng);
    init_layers(cfg.head_spec(variant), flat.data() + head_offset(), rng);
}

PreparedObs prepare_obs(const sensor::ObservationSet& obs,
                        const std::vector<sensor::SegmentationResult>& segs,
                        const DecoderConfig& cfg) {
    if (obs.grids.size() != static_cast<size_t>(cfg.viewCount) || segs.size() != obs.grids.size())
        throw Error("prepare_obs: view count mismatch");
    PreparedObs out;
    out.segs = segs;
    out.tokens.reserve(segs.size());
    for (size_t v = 0; v < segs.size(); ++v) {
        out.tokens.push_back(crop_mask_pool(obs.grids[v], segs[v], cfg.poolGrid, cfg.poolMax));
        if (out.tokens.back().D != cfg.featureDim)
            throw Error("prepare_obs: observation feature dim does not match the decoder config");
    }
    return out;
}

namespace {

// ---- attention block (weights shared across views) ----

struct AttnTape {
    std::vector<double> Q, K, V;  // T x D
    std::vector<double> P;        // heads x T x T
    std::vector<double> O;        // T x D (heads concatenated)
};

void attention_view_forward(const DecoderParams& p, const TokenGrid& cur, const TokenGrid& goal,
                            AttnTape& tape, double* pooled) {
    int T = cur.G * cur.G, D = cur.D, heads = p.cfg.attnHeads, dh = D / heads;
    const double* Wq = p.flat.data() + p.attn_offset(0);
    const double* Wk = p.flat.data() + p.attn_offset(1);
    const double* Wv = p.flat.data() + p.attn_offset(2);
    const double* Wo = p.flat.data() + p.attn_offset(3);
    size_t TD = static_cast<size_t>(T) * D;
    tape.Q.resize(TD);
    tape.K.resize(TD);
    tape.V.resize(TD);
    tape.P.assign(static_cast<size_t>(heads) * T * T, 0.0);
    tape.O.assign(TD, 0.0);

    kern::gemm_nt(T, D, D, cur.tokens.data(), D, Wq, D, tape.Q.data(), D, false);
    kern::gemm_nt(T, D, D, goal.tokens.data(), D, Wk, D, tape.K.data(), D, false);
    kern::gemm_nt(T, D, D, goal.tokens.data(), D, Wv, D, tape.V.data(), D, false);

    double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> S(static_cast<size_t>(T) * T);
    for (int h = 0; h < heads; ++h) {
        const double* Qh = tape.Q.data() + h * dh;
        const double* Kh = tape.K.data() + h * dh;
        const double* Vh = tape.V.data() + h * dh;
        double* Ph = tape.P.data() + static_cast<size_t>(h) * T * T;
        kern::gemm_nt(T, T, dh, Qh, D, Kh, D, S.data(), T, false);
        for (int i = 0; i < T; ++i) {
            double* row = S.data() + static_cast<size_t>(i) * T;
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < T; ++j) mx = std::max(mx, row[j] * scale);
            double sum = 0.0;
            double* prow = Ph + static_cast<size_t>(i) * T;
            for (int j = 0; j < T; ++j) {
                prow[j] = std::exp(row[j] * scale - mx);
                sum += prow[j];
            }
            double inv = 1.0 / sum;
            for (int j = 0; j < T; ++j) prow[j] *= inv;
        }
        kern::gemm_nn(T, dh, T, Ph, T, Vh, D, tape.O.data() + h * dh, D, false);
    }

    // pooled = mean over rows of O * Wo^T
    std::vector<double> Y(TD);
    kern::gemm_nt(T, D, D, tape.O.data(), D, Wo, D, Y.data(), D, false);
    std::fill_n(pooled, D, 0.0);
    for (int i = 0; i < T; ++i)
        for (int d = 0; d < D; ++d) pooled[d] += Y[static_cast<size_t>(i) * D + d];
    double inv = 1.0 / T;
    for (int d = 0; d < D; ++d) pooled[d] *= inv;
}

void attention_view_backward(const DecoderParams& p, const TokenGrid& cur, const TokenGrid& goal,
                             const AttnTape& tape, const double* dPooled, double* gradFlat,
                             std::vector<double>* dCur, std::vector<double>* dGoal) {
    int T = cur.G * cur.G, D = cur.D, heads = p.cfg.attnHeads, dh = D / heads;
    const double* Wq = p.flat.data() + p.attn_offset(0);
    const double* Wk = p.flat.data() + p.attn_offset(1);
    const double* Wv = p.flat.data() + p.attn_offset(2);
    const double* Wo = p.flat.data() + p.attn_offset(3);
    double* dWq = gradFlat + p.attn_offset(0);
    double* dWk = gradFlat + p.attn_offset(1);
    double* dWv = gradFlat + p.attn_offset(2);
    double* dWo = gradFlat + p.attn_offset(3);
    size_t TD = static_cast<size_t>(T) * D;

    // dY rows are all dPooled / T
    std::vector<double> dY(TD);
    double inv = 1.0 / T;
    for (int i = 0; i < T; ++i)
        for (int d = 0; d < D; ++d) dY[static_cast<size_t>(i) * D + d] = dPooled[d] * inv;

    // Y = O * Wo^T
    kern::gemm_tn(D, D, T, dY.data(), D, tape.O.data(), D, dWo, D, true);
    std::vector<double> dO(TD);
    kern::gemm_nn(T, D, D, dY.data(), D, Wo, D, dO.data(), D, false);

    std::vector<double> dQ(TD, 0.0), dK(TD, 0.0), dV(TD, 0.0);
    std::vector<double> dP(static_cast<size_t>(T) * T), dS(static_cast<size_t>(T) * T);
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < heads; ++h) {
        const double* Ph = tape.P.data() + static_cast<size_t>(h) * T * T;
        const double* Vh = tape.V.data() + h * dh;
        const double* Qh = tape.Q.data() + h * dh;
        const double* Kh = tape.K.data() + h * dh;
        // O_h = P_h V_h
        kern::gemm_nt(T, T, dh, dO.data() + h * dh, D, Vh, D, dP.data(), T, false);
        kern::gemm_tn(T, dh, T, Ph, T, dO.data() + h * dh, D, dV.data() + h * dh, D, true);
        // softmax backward, then the 1/sqrt(dh) scale
        for (int i = 0; i < T; ++i) {
            const double* prow = Ph + static_cast<size_t>(i) * T;
            const double* dprow = dP.data() + static_cast<size_t>(i) * T;
            double dot = 0.0;
            for (int j = 0; j < T; ++j) dot += prow[j] * dprow[j];
            double* dsrow = dS.data() + static_cast<size_t>(i) * T;
            for (int j = 0; j < T; ++j) dsrow[j] = scale * prow[j] * (dprow[j] - dot);
        }
        kern::gemm_nn(T, dh, T, dS.data(), T, Kh, D, dQ.data() + h * dh, D, true);
        kern::gemm_tn(T, dh, T, dS.data(), T, Qh, D, dK.data() + h * dh, D, true);
    }

    kern::gemm_tn(D, D, T, dQ.data(), D, cur.tokens.data(), D, dWq, D, true);
    kern::gemm_tn(D, D, T, dK.data(), D, goal.tokens.data(), D, dWk, D, true);
    kern::gemm_tn(D, D, T, dV.data(), D, goal.tokens.data(), D, dWv, D, true);
    if (dCur) kern::gemm_nn(T, D, D, dQ.data(), D, Wq, D, dCur->data(), D, true);
    if (dGoal) {
        kern::gemm_nn(T, D, D, dK.data(), D, Wk, D, dGoal->data(), D, true);
        kern::gemm_nn(T, D, D, dV.data(), D, Wv, D, dGoal->data(), D, true);
    }
}

// Head input for one pair under the score variant: the 4 flattened score
// matrices followed by the box embedding (filled by the caller).
void fill_score_row(const DecoderParams& p, const PreparedObs& cur, const PreparedObs& goal,
                    double* row) {
    int K = p.cfg.token_count();
    for (int v = 0; v < p.cfg.viewCount; ++v) {
        auto sm = score_matrix(cur.tokens[v], goal.tokens[v]);
        std::memcpy(row + static_cast<size_t>(v) * K * K, sm.scores.data(),
                    sm.scores.size() * sizeof(double));
    }
}

}  // namespace

PolicyOutput decoder_forward(const DecoderParams& params, const PreparedObs& cur,
                             const PreparedObs& goal) {
    const DecoderConfig& cfg = params.cfg;
    if (static_cast<int>(cur.tokens.size()) != cfg.viewCount ||
        static_cast<int>(goal.tokens.size()) != cfg.viewCount)
        throw Error("decoder_forward: view count mismatch");
    if (params.flat.size() != params.param_count())
        throw Error("decoder_forward: parameter vector size mismatch");

    std::vector<double> xbox = box_feature(cur.segs, goal.segs);
    nn::Tape boxTape;
    nn::forward_batch(cfg.box_spec(), params.flat.data() + params.box_offset(), xbox.data(), 1,
                      boxTape);

    int headIn = cfg.head_input_dim(params.variant);
    std::vector<double> xhead(headIn);
    if (params.variant == Variant::Score) {
        fill_score_row(params, cur, goal, xhead.data());
        std::memcpy(xhead.data() + cfg.score_width(), boxTape.output(),
                    cfg.boxDim * sizeof(double));
    } else {
        AttnTape tape;
        for (int v = 0; v < cfg.viewCount; ++v)
            attention_view_forward(params, cur.tokens[v], goal.tokens[v], tape,
                                   xhead.data() + static_cast<size_t>(v) * cfg.featureDim);
        std::memcpy(xhead.data() + static_cast<size_t>(cfg.viewCount) * cfg.featureDim,
                    boxTape.output(), cfg.boxDim * sizeof(double));
    }

    nn::Tape headTape;
    nn::forward_batch(cfg.head_spec(params.variant), params.flat.data() + params.head_offset(),
                      xhead.data(), 1, headTape);

    PolicyOutput out;
    std::memcpy(out.logits.data(), headTape.output(), 9 * sizeof(double));
    for (double l : out.logits)
        if (!std::isfinite(l)) throw Error("decoder_forward: non-finite logit");
    out.auxStats = view_aux_stats(cur.segs);
    return out;
}

double decoder_loss_and_grad(const DecoderParams& params, const PreparedObs& cur,
                             const PreparedObs& goal, const world::ActionTriple& label,
                             std::vector<double>& gradFlat,
                             std::vector<std::vector<double>>* dCurTokens,
                             std::vector<std::vector<double>>* dGoalTokens) {
    const DecoderConfig& cfg = params.cfg;
    gradFlat.assign(params.param_count(), 0.0);
    if (dCurTokens) {
        dCurTokens->assign(cfg.viewCount, {});
        for (auto& d : *dCurTokens) d.assign(cur.tokens[0].tokens.size(), 0.0);
    }
    if (dGoalTokens) {
        dGoalTokens->assign(cfg.viewCount, {});
        for (auto& d : *dGoalTokens) d.assign(goal.tokens[0].tokens.size(), 0.0);
    }

    std::vector<double> xbox = box_feature(cur.segs, goal.segs);
    nn::Tape boxTape;
    nn::forward_batch(cfg.box_spec(), params.flat.data() + params.box_offset(), xbox.data(), 1,
                      boxTape);

    int headIn = cfg.head_input_dim(params.variant);
    std::vector<double> xhead(headIn);
    std::vector<AttnTape> attnTapes;
    if (params.variant == Variant::Score) {
        fill_score_row(params, cur, goal, xhead.data());
        std::memcpy(xhead.data() + cfg.score_width(), boxTape.output(),
                    cfg.boxDim * sizeof(double));
    } else {
        attnTapes.resize(cfg.viewCount);
        for (int v = 0; v < cfg.viewCount; ++v)
            attention_view_forward(params, cur.tokens[v], goal.tokens[v], attnTapes[v],
                                   xhead.data() + static_cast<size_t>(v) * cfg.featureDim);
        std::memcpy(xhead.data() + static_cast<size_t>(cfg.viewCount) * cfg.featureDim,
                    boxTape.output(), cfg.boxDim * sizeof(double));
    }

    nn::NetSpec headSpec = cfg.head_spec(params.variant);
    nn::Tape headTape;
    nn::forward_batch(headSpec, params.flat.data() + params.head_offset(), xhead.data(), 1,
                      headTape);
    double dLogits[9];
    double loss = nn::bc_loss(headTape.output(), label, dLogits);

    std::vector<double> dxhead(headIn);
    nn::backward_batch(headSpec, params.flat.data() + params.head_offset(), headTape, dLogits,
                       gradFlat.data() + params.head_offset(), dxhead.data());

    int eboxOffset = headIn - cfg.boxDim;
    if (params.variant == Variant::Score) {
        if (dCurTokens || dGoalTokens) {
            int K = cfg.token_count();
            for (int v = 0; v < cfg.viewCount; ++v)
                score_matrix_backward(cur.tokens[v], goal.tokens[v],
                                      dxhead.data() + static_cast<size_t>(v) * K * K,
                                      dCurTokens ? &(*dCurTokens)[v] : nullptr,
                                      dGoalTokens ? &(*dGoalTokens)[v] : nullptr);
        }
    } else {
        for (int v = 0; v < cfg.viewCount; ++v)
            attention_view_backward(params, cur.tokens[v], goal.tokens[v], attnTapes[v],
                                    dxhead.data() + static_cast<size_t>(v) * cfg.featureDim,
                                    gradFlat.data(), dCurTokens ? &(*dCurTokens)[v] : nullptr,
                                    dGoalTokens ? &(*dGoalTokens)[v] : nullptr);
    }

    nn::backward_batch(cfg.box_spec(), params.flat.data() + params.box_offset(), boxTape,
                       dxhead.data() + eboxOffset, gradFlat.data() + params.box_offset());
    return loss;
}

void PooledStore::append(const PreparedObs& obs) {
    if (static_cast<int>(obs.tokens.size()) != cfg.viewCount)
        throw Error("PooledStore: view count mismatch");
    int K = cfg.token_count(), D = cfg.featureDim;
    for (int v = 0; v < cfg.viewCount; ++v) {
        const TokenGrid& t = obs.tokens[v];
        if (t.G != cfg.poolGrid || t.D != D) throw Error("PooledStore: token shape mismatch");
        tokens.insert(tokens.end(), t.tokens.begin(), t.tokens.end());
        size_t base = invNorm.size();
        invNorm.resize(base + K);
        inverse_norms(t, invNorm.data() + base);
        double five[5];
        box_row(obs.segs[v], five);
        box5.insert(box5.end(), five, five + 5);
    }
    count++;
}

DecoderTrainer::DecoderTrainer(DecoderParams& params, const PooledStore& store,
                               std::vector<PairSample> samples)
    : params_(params), store_(store), samples_(std::move(samples)) {
    if (samples_.empty()) throw Error("DecoderTrainer: no samples");
    if (params_.flat.size() != params_.param_count())
        throw Error("DecoderTrainer: parameters not allocated");
    for (const auto& s : samples_)
        if (s.curObs < 0 || s.goalObs < 0 || static_cast<size_t>(s.curObs) >= store_.count ||
            static_cast<size_t>(s.goalObs) >= store_.count)
            throw Error("DecoderTrainer: sample references missing observation");
}

double DecoderTrainer::loss_and_grad(const std::vector<int64_t>& batch,
                                     std::vector<double>& grad) {
    if (batch.empty()) throw Error("DecoderTrainer: empty batch");
    return params_.variant == Variant::Score ? score_batch(batch, grad)
                                             : attention_batch(batch, grad);
}

double DecoderTrainer::score_batch(const std::vector<int64_t>& batch, std::vector<double>& grad) {
    const DecoderConfig& cfg = store_.cfg;
    int B = static_cast<int>(batch.size());
    int K = cfg.token_count(), D = cfg.featureDim;
    int boxIn = cfg.box_input_dim();
    int headIn = cfg.head_input_dim(Variant::Score);
    int scoreW = cfg.score_width();
    size_t viewTok = static_cast<size_t>(K) * D;

    xbox_.resize(static_cast<size_t>(B) * boxIn);
    xhead_.resize(static_cast<size_t>(B) * headIn);
    for (int i = 0; i < B; ++i) {
        const PairSample& s = samples_[batch[i]];
        const double* curBox = store_.obs_box(s.curObs);
        const double* goalBox = store_.obs_box(s.goalObs);
        double* brow = xbox_.data() + static_cast<size_t>(i) * boxIn;
        for (int v = 0; v < cfg.viewCount; ++v) {
            std::memcpy(brow + v * 10, curBox + v * 5, 5 * sizeof(double));
            std::memcpy(brow + v * 10 + 5, goalBox + v * 5, 5 * sizeof(double));
        }
        double* hrow = xhead_.data() + static_cast<size_t>(i) * headIn;
        const double* curTok = store_.obs_tokens(s.curObs);
        const double* goalTok = store_.obs_tokens(s.goalObs);
        const double* curNorm = store_.obs_norms(s.curObs);
        const double* goalNorm = store_.obs_norms(s.goalObs);
        for (int v = 0; v < cfg.viewCount; ++v) {
            double* sm = hrow + static_cast<size_t>(v) * K * K;
            kern::gemm_nt(K, K, D, curTok + v * viewTok, D, goalTok + v * viewTok, D, sm, K,
                          false);
            cosine_from_dots(sm, K, curNorm + static_cast<size_t>(v) * K,
                             goalNorm + static_cast<size_t>(v) * K);
        }
    }

    nn::NetSpec boxSpec = cfg.box_spec();
    nn::forward_batch(boxSpec, params_.flat.data() + params_.box_offset(), xbox_.data(), B,
                      boxTape_);
    for (int i = 0; i < B; ++i)
        std::memcpy(xhead_.data() + static_cast<size_t>(i) * headIn + scoreW,
                    boxTape_.output() + static_cast<size_t>(i) * cfg.boxDim,
                    cfg.boxDim * sizeof(double));

    nn::NetSpec headSpec = cfg.head_spec(Variant::Score);
    nn::forward_batch(headSpec, params_.flat.data() + params_.head_offset(), xhead_.data(), B,
                      headTape_);

    dlogits_.assign(static_cast<size_t>(B) * 9, 0.0);
    double lossSum = 0.0;
    for (int i = 0; i < B; ++i)
        lossSum += nn::bc_loss(headTape_.output() + static_cast<size_t>(i) * 9,
                               samples_[batch[i]].label, dlogits_.data() + static_cast<size_t>(i) * 9);
    double inv = 1.0 / B;
    for (auto& g : dlogits_) g *= inv;

    debox_.resize(static_cast<size_t>(B) * cfg.boxDim);
    nn::backward_batch(headSpec, params_.flat.data() + params_.head_offset(), headTape_,
                       dlogits_.data(), grad.data() + params_.head_offset(), debox_.data(),
                       {scoreW, cfg.boxDim});
    nn::backward_batch(boxSpec, params_.flat.data() + params_.box_offset(), boxTape_,
                       debox_.data(), grad.data() + params_.box_offset());
    return lossSum * inv;
}

double DecoderTrainer::attention_batch(const std::vector<int64_t>& batch,
                                       std::vector<double>& grad) {
    const DecoderConfig& cfg = store_.cfg;
    int B = static_cast<int>(batch.size());
    int K = cfg.token_count(), D = cfg.featureDim;
    int boxIn = cfg.box_input_dim();
    int headIn = cfg.head_input_dim(Variant::Attention);
    int pooledW = cfg.viewCount * D;
    size_t viewTok = static_cast<size_t>(K) * D;

    // Token views over the store for the shared attention helpers.
    auto grid_of = [&](int64_t obsIdx, int v) {
        TokenGrid t;
        t.G = cfg.poolGrid;
        t.D = D;
        const double* src = store_.obs_tokens(obsIdx) + v * viewTok;
        t.tokens.assign(src, src + viewTok);
        return t;
    };

    xbox_.resize(static_cast<size_t>(B) * boxIn);
    xhead_.resize(static_cast<size_t>(B) * headIn);
    std::vector<AttnTape> tapes(static_cast<size_t>(B) * cfg.viewCount);
    std::vector<TokenGrid> curGrids(tapes.size()), goalGrids(tapes.size());
    for (int i = 0; i < B; ++i) {
        const PairSample& s = samples_[batch[i]];
        const double* curBox = store_.obs_box(s.curObs);
        const double* goalBox = store_.obs_box(s.goalObs);
        double* brow = xbox_.data() + static_cast<size_t>(i) * boxIn;
        for (int v = 0; v < cfg.viewCount; ++v) {
            std::memcpy(brow + v * 10, curBox + v * 5, 5 * sizeof(double));
            std::memcpy(brow + v * 10 + 5, goalBox + v * 5, 5 * sizeof(double));
        }
        double* hrow = xhead_.data() + static_cast<size_t>(i) * headIn;
        for (int v = 0; v < cfg.viewCount; ++v) {
            size_t slot = static_cast<size_t>(i) * cfg.viewCount + v;
            curGrids[slot] = grid_of(s.curObs, v);
            goalGrids[slot] = grid_of(s.goalObs, v);
            attention_view_forward(params_, curGrids[slot], goalGrids[slot], tapes[slot],
                                   hrow + static_cast<size_t>(v) * D);
        }
    }

    nn::NetSpec boxSpec = cfg.box_spec();
    nn::forward_batch(boxSpec, params_.flat.data() + params_.box_offset(), xbox_.data(), B,
                      boxTape_);
    for (int i = 0; i < B; ++i)
        std::memcpy(xhead_.data() + static_cast<size_t>(i) * headIn + pooledW,
                    boxTape_.output() + static_cast<size_t>(i) * cfg.boxDim,
                    cfg.boxDim * sizeof(double));

    nn::NetSpec headSpec = cfg.head_spec(Variant::Attention);
    nn::forward_batch(headSpec, params_.flat.data() + params_.head_offset(), xhead_.data(), B,
                      headTape_);

    dlogits_.assign(static_cast<size_t>(B) * 9, 0.0);
    double lossSum = 0.0;
    for (int i = 0; i < B; ++i)
        lossSum += nn::bc_loss(headTape_.output() + static_cast<size_t>(i) * 9,
                               samples_[batch[i]].label, dlogits_.data() + static_cast<size_t>(i) * 9);
    double inv = 1.0 / B;
    for (auto& g : dlogits_) g *= inv;

    dxhead_.resize(static_cast<size_t>(B) * headIn);
    nn::backward_batch(headSpec, params_.flat.data() + params_.head_offset(), headTape_,
                       dlogits_.data(), grad.data() + params_.head_offset(), dxhead_.data());

    debox_.resize(static_cast<size_t>(B) * cfg.boxDim);
    for (int i = 0; i < B; ++i) {
        const double* drow = dxhead_.data() + static_cast<size_t>(i) * headIn;
        std::memcpy(debox_.data() + static_cast<size_t>(i) * cfg.boxDim, drow + pooledW,
                    cfg.boxDim * sizeof(double));
        for (int v = 0; v < cfg.viewCount; ++v) {
            size_t slot = static_cast<size_t>(i) * cfg.viewCount + v;
            attention_view_backward(params_, curGrids[slot], goalGrids[slot], tapes[slot],
                                    drow + static_cast<size_t>(v) * D, grad.data(), nullptr,
                                    nullptr);
        }
    }
    nn::backward_batch(boxSpec, params_.flat.data() + params_.box_offset(), boxTape_,
                       debox_.data(), grad.data() + params_.box_offset());
    return lossSum * inv;
}

}  // namespace lmnav::decoders
