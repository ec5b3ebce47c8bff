#include "lmnav/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lmnav::sensor {

using world::Vec2;

void CameraRig::validate() const {
    if (views.size() != 4) throw Error("camera rig: exactly 4 views required");
    static const char* names[4] = {"front", "right", "back", "left"};
    const double offsets[4] = {0.0, -kPi / 2.0, kPi, kPi / 2.0};
    for (int i = 0; i < 4; ++i) {
        if (views[i].name != names[i]) throw Error("camera rig: view order must be front, right, back, left");
        if (std::abs(world::normalize_angle(views[i].yawOffset - offsets[i])) > 1e-9)
            throw Error("camera rig: yaw offset of view '" + views[i].name + "' is off its quadrant");
        if (!(views[i].horizontalFov > 0.0) || views[i].horizontalFov > kTwoPi)
            throw Error("camera rig: bad horizontal fov");
    }
    // Union of the four FOVs must cover the full circle.
    for (int d = 0; d < 360; ++d) {
        double a = deg2rad(d - 180 + 0.5);
        bool covered = false;
        for (const auto& v : views) {
            double rel = world::normalize_angle(a - v.yawOffset);
            if (std::abs(rel) <= v.horizontalFov / 2.0) { covered = true; break; }
        }
        if (!covered) throw Error("camera rig: FOV union leaves a blind spot");
    }
    if (patchH < 1 || patchW < 1 || featureDim < 1) throw Error("camera rig: grid dims must be >= 1");
    if (!(verticalFov > 0.0) || verticalFov >= kPi) throw Error("camera rig: bad vertical fov");
    if (!(cameraHeight > 0.0)) throw Error("camera rig: camera height must be positive");
}

int CameraRig::view_index(const std::string& name) const {
    for (size_t i = 0; i < views.size(); ++i)
        if (views[i].name == name) return static_cast<int>(i);
    throw Error("camera rig: unknown view '" + name + "'");
}

CameraRig default_rig() {
    CameraRig rig;
    rig.views = {{"front", 0.0, deg2rad(120.0)},
                 {"right", -kPi / 2.0, deg2rad(100.0)},
                 {"back", kPi, deg2rad(100.0)},
                 {"left", kPi / 2.0, deg2rad(100.0)}};
    return rig;
}

void SegNoiseModel::validate() const {
    for (double p : {dropoutProb, flickerProb, falsePositiveProb})
        if (p < 0.0 || p > 1.0) throw Error("segmentation noise: probabilities must lie in [0,1]");
    if (jitterCells < 0) throw Error("segmentation noise: jitterCells must be >= 0");
}

size_t SegmentationResult::set_cells() const {
    size_t n = 0;
    for (uint8_t m : mask) n += m;
    return n;
}

void SegmentationResult::recompute_box() {
    int rMin = gridH, rMax = -1, cMin = gridW, cMax = -1;
    for (int r = 0; r < gridH; ++r)
        for (int c = 0; c < gridW; ++c)
            if (cell(r, c)) {
                rMin = std::min(rMin, r);
                rMax = std::max(rMax, r);
                cMin = std::min(cMin, c);
                cMax = std::max(cMax, c);
            }
    present = rMax >= 0;
    if (present) {
        uMin = static_cast<double>(cMin) / gridW;
        uMax = static_cast<double>(cMax + 1) / gridW;
        vMin = static_cast<double>(rMin) / gridH;
        vMax = static_cast<double>(rMax + 1) / gridH;
    } else {
        uMin = vMin = uMax = vMax = 0.0;
    }
}

namespace {

// Column c's viewing direction within a view: azimuth relative to the view
// axis, positive to the left, so u grows left-to-right across the image.
double column_azimuth(int c, int W, double hFov) {
    return (0.5 - (c + 0.5) / static_cast<double>(W)) * hFov;
}

struct ColumnHit {
    int objectIndex = -1;  // index into Scene::all_objects(), -1 = background
    double distance = 0.0;
    Vec2 worldPoint{};
};

// Casts one ray per patch column against every object, keeping the nearest
// hit. `objs` may hold a single object for the no-occlusion oracle.
std::vector<ColumnHit> cast_columns(const Pose2D& robot, const std::vector<const PlacedObject*>& objs,
                                    const CameraRig& rig, int view) {
    const CameraView& v = rig.views[view];
    std::vector<ColumnHit> hits(rig.patchW);
    Vec2 origin{robot.x, robot.y};
    for (int c = 0; c < rig.patchW; ++c) {
        double ang = robot.theta + v.yawOffset + column_azimuth(c, rig.patchW, v.horizontalFov);
        Vec2 dir{std::cos(ang), std::sin(ang)};
        ColumnHit best;
        best.distance = std::numeric_limits<double>::infinity();
        for (size_t oi = 0; oi < objs.size(); ++oi) {
            const PlacedObject& po = *objs[oi];
            // Footprint into world frame.
            double cs = std::cos(po.pose.theta), sn = std::sin(po.pose.theta);
            std::vector<Vec2> poly(po.instance.footprint.size());
            for (size_t k = 0; k < poly.size(); ++k) {
                const Vec2& p = po.instance.footprint[k];
                poly[k] = {po.pose.x + cs * p.x - sn * p.y, po.pose.y + sn * p.x + cs * p.y};
            }
            auto t = world::ray_convex_polygon(origin, dir, poly);
            if (t && *t < best.distance) {
                best.distance = *t;
                best.objectIndex = static_cast<int>(oi);
                best.worldPoint = {origin.x + dir.x * *t, origin.y + dir.y * *t};
            }
        }
        if (best.objectIndex < 0) best.distance = 0.0;
        hits[c] = best;
    }
    return hits;
}

// Patch rows whose center falls inside the object's vertical extent at
// distance d, by similar triangles through a camera at cameraHeight.
// Row centers map linearly to heights; inverse used for surface z.
struct RowSpan {
    int first = 0, last = -1;  // inclusive; empty when last < first
};

RowSpan vertical_span(double distance, double objHeight, const CameraRig& rig) {
    double halfExtent = std::max(distance, 1e-6) * std::tan(rig.verticalFov / 2.0);
    double vTop = 0.5 - (objHeight - rig.cameraHeight) / (2.0 * halfExtent);
    double vBot = 0.5 + rig.cameraHeight / (2.0 * halfExtent);
    vTop = std::max(vTop, 0.0);
    vBot = std::min(vBot, 1.0);
    RowSpan s;
    s.first = std::max(0, static_cast<int>(std::ceil(vTop * rig.patchH - 0.5)));
    s.last = std::min(rig.patchH - 1, static_cast<int>(std::floor(vBot * rig.patchH - 0.5)));
    return s;
}

double row_height(int r, double distance, const CameraRig& rig) {
    double halfExtent = std::max(distance, 1e-6) * std::tan(rig.verticalFov / 2.0);
    double v = (r + 0.5) / static_cast<double>(rig.patchH);
    return rig.cameraHeight - (v - 0.5) * 2.0 * halfExtent;
}

void check_degenerate(const Pose2D& robot, const std::vector<const PlacedObject*>& objs) {
    for (const auto* po : objs) {
        Vec2 c = world::polygon_centroid(po->instance.footprint);
        double cs = std::cos(po->pose.theta), sn = std::sin(po->pose.theta);
        double wx = po->pose.x + cs * c.x - sn * c.y;
        double wy = po->pose.y + sn * c.x + cs * c.y;
        if (std::hypot(robot.x - wx, robot.y - wy) < 1e-9)
            throw Error("degenerate geometry: robot at centroid of object '" + po->instance.instanceId + "'");
    }
}

SegmentationResult seg_from_hits(const std::vector<ColumnHit>& hits, int objectIndex, double objHeight,
                                 const CameraRig& rig, int view) {
    SegmentationResult seg;
    seg.view = view;
    seg.gridH = rig.patchH;
    seg.gridW = rig.patchW;
    seg.mask.assign(static_cast<size_t>(rig.patchH) * rig.patchW, 0);
    for (int c = 0; c < rig.patchW; ++c) {
        if (hits[c].objectIndex != objectIndex) continue;
        RowSpan span = vertical_span(hits[c].distance, objHeight, rig);
        for (int r = span.first; r <= span.last; ++r)
            seg.mask[static_cast<size_t>(r) * rig.patchW + c] = 1;
    }
    seg.recompute_box();
    return seg;
}

void lattice_vector(uint64_t fieldSeed, int64_t qx, int64_t qy, int64_t qz, int D, float* out) {
    uint64_t h = fieldSeed;
    h = fnv1a64(&qx, sizeof qx, h);
    h = fnv1a64(&qy, sizeof qy, h);
    h = fnv1a64(&qz, sizeof qz, h);
    Rng r(h);
    for (int d = 0; d < D; ++d) out[d] = static_cast<float>(r.uniform(-1.0, 1.0));
}

// Deterministic vector field over surface points: hashed lattice vectors at
// `cell` pitch, trilinearly interpolated. Nearby points get similar features
// and points farther apart than the pitch decorrelate — the gradient real
// encoder embeddings exhibit under viewpoint change, which downstream
// similarity heads depend on. Component 0 is lifted by a fixed margin so
// object features can never collide with the background vector (whose
// components stay within [-0.5, 0.5]).
void field_vector(uint64_t fieldSeed, double x, double y, double z, double cell, int D, float* out) {
    double fx = std::floor(x / cell), fy = std::floor(y / cell), fz = std::floor(z / cell);
    double tx = x / cell - fx, ty = y / cell - fy, tz = z / cell - fz;
    int64_t qx = static_cast<int64_t>(fx), qy = static_cast<int64_t>(fy), qz = static_cast<int64_t>(fz);
    std::fill_n(out, D, 0.0f);
    float corner[64];
    std::vector<float> wide;
    float* cv = corner;
    if (D > 64) {
        wide.resize(D);
        cv = wide.data();
    }
    for (int dx = 0; dx <= 1; ++dx) {
        for (int dy = 0; dy <= 1; ++dy) {
            for (int dz = 0; dz <= 1; ++dz) {
                double w = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) * (dz ? tz : 1.0 - tz);
                if (w == 0.0) continue;
                lattice_vector(fieldSeed, qx + dx, qy + dy, qz + dz, D, cv);
                float fw = static_cast<float>(w);
                for (int d = 0; d < D; ++d) out[d] += fw * cv[d];
            }
        }
    }
    out[0] += 2.0f;
}

void background_vector(uint64_t environmentSeed, int D, float* out) {
    Rng r(derive_seed(environmentSeed, "background"));
    for (int d = 0; d < D; ++d) out[d] = static_cast<float>(r.uniform(-0.5, 0.5));
}

}  // namespace

SegmentationResult project_object(const Pose2D& robot, const PlacedObject& obj, const CameraRig& rig, int view) {
    rig.validate();
    if (view < 0 || view >= static_cast<int>(rig.views.size())) throw Error("project_object: bad view index");
    std::vector<const PlacedObject*> objs{&obj};
    check_degenerate(robot, objs);
    auto hits = cast_columns(robot, objs, rig, view);
    return seg_from_hits(hits, 0, obj.instance.height, rig, view);
}

ObservationSet render_observation(const Scene& scene, const Pose2D& robot, const SensorConfig& cfg, Rng& rng) {
    const CameraRig& rig = cfg.rig;
    rig.validate();
    auto objs = scene.all_objects();
    check_degenerate(robot, objs);

    const int H = rig.patchH, W = rig.patchW, D = rig.featureDim;
    std::vector<float> background(D);
    background_vector(scene.environmentSeed, D, background.data());

    ObservationSet obs;
    obs.truePose = robot;
    obs.grids.resize(rig.views.size());
    for (const auto* po : objs)
        obs.allSegs[po->instance.instanceId].resize(rig.views.size());

    std::vector<float> fieldA(D), fieldB(D);
    for (int view = 0; view < static_cast<int>(rig.views.size()); ++view) {
        auto hits = cast_columns(robot, objs, rig, view);
        for (size_t oi = 0; oi < objs.size(); ++oi)
            obs.allSegs[objs[oi]->instance.instanceId][view] =
                seg_from_hits(hits, static_cast<int>(oi), objs[oi]->instance.height, rig, view);

        FeatureGrid& grid = obs.grids[view];
        grid.view = view;
        grid.data.assign(static_cast<size_t>(H) * W * D, 0.0f);
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) {
                float* cell = grid.at(r, c, W, D);
                const ColumnHit& hit = hits[c];
                const PlacedObject* po = hit.objectIndex >= 0 ? objs[hit.objectIndex] : nullptr;
                bool onObject = false;
                if (po) {
                    const auto& seg = obs.allSegs.at(po->instance.instanceId)[view];
                    onObject = seg.mask[static_cast<size_t>(r) * W + c] != 0;
                }
                if (onObject) {
                    // Surface point in the object's own frame -> features are
                    // view-independent by construction.
                    double cs = std::cos(po->pose.theta), sn = std::sin(po->pose.theta);
                    double lx = hit.worldPoint.x - po->pose.x;
                    double ly = hit.worldPoint.y - po->pose.y;
                    double ox = cs * lx + sn * ly;
                    double oy = -sn * lx + cs * ly;
                    double oz = row_height(r, hit.distance, rig);
                    const auto& inst = po->instance;
                    field_vector(fnv1a64(inst.categoryId), ox, oy, oz, cfg.surfaceCell, D, fieldA.data());
                    field_vector(inst.appearanceSeed, ox, oy, oz, cfg.surfaceCell, D, fieldB.data());
                    double w = inst.categoryBlend;
                    for (int d = 0; d < D; ++d)
                        cell[d] = static_cast<float>(w * fieldA[d] + (1.0 - w) * fieldB[d]);
                } else {
                    std::copy(background.begin(), background.end(), cell);
                }
            }
        }
        if (cfg.featureNoiseStd > 0.0) {
            for (size_t i = 0; i < grid.data.size(); ++i)
                grid.data[i] += static_cast<float>(rng.gaussian(0.0, cfg.featureNoiseStd));
        }
    }
    obs.segs = obs.allSegs.at(scene.target.instance.instanceId);
    return obs;
}

namespace {

std::vector<uint8_t> morph(const std::vector<uint8_t>& mask, int H, int W, int radius, bool dilate) {
    std::vector<uint8_t> out(mask.size(), 0);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            bool any = false, all = true;
            for (int dr = -radius; dr <= radius; ++dr) {
                for (int dc = -radius; dc <= radius; ++dc) {
                    int rr = r + dr, cc = c + dc;
                    bool v = rr >= 0 && rr < H && cc >= 0 && cc < W &&
                             mask[static_cast<size_t>(rr) * W + cc] != 0;
                    any = any || v;
                    all = all && v;
                }
            }
            out[static_cast<size_t>(r) * W + c] = dilate ? any : all;
        }
    }
    return out;
}

}  // namespace

std::vector<SegmentationResult> segment(const ObservationSet& obs, const std::string& targetId,
                                        const SegNoiseModel& noise, Rng& rng) {
    noise.validate();
    auto it = obs.allSegs.find(targetId);
    if (it == obs.allSegs.end()) throw Error("segment: unknown target '" + targetId + "'");
    const auto& oracle = it->second;

    std::vector<const std::vector<SegmentationResult>*> distractors;
    for (const auto& [id, segs] : obs.allSegs)
        if (id != targetId) distractors.push_back(&segs);

    const int viewCount = static_cast<int>(oracle.size());
    std::vector<SegmentationResult> out(viewCount);
    for (int view = 0; view < viewCount; ++view) {
        SegmentationResult seg = oracle[view];
        if (noise.dropoutProb > 0.0 && rng.uniform() < noise.dropoutProb) {
            seg.mask.assign(seg.mask.size(), 0);
            seg.recompute_box();
            out[view] = seg;
            continue;
        }
        if (noise.falsePositiveProb > 0.0 && !distractors.empty() && rng.uniform() < noise.falsePositiveProb) {
            int pick = rng.uniform_int(0, static_cast<int>(distractors.size()) - 1);
            seg = (*distractors[pick])[view];
        }
        if (noise.jitterCells > 0) {
            bool dilate = rng.uniform() < 0.5;
            seg.mask = morph(seg.mask, seg.gridH, seg.gridW, noise.jitterCells, dilate);
        }
        if (noise.flickerProb > 0.0) {
            for (size_t i = 0; i < seg.mask.size(); ++i)
                if (rng.uniform() < noise.flickerProb) seg.mask[i] ^= 1;
        }
        seg.recompute_box();
        out[view] = seg;
    }
    return out;
}

}  // namespace lmnav::sensor
