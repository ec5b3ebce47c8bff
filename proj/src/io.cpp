#include "lmnav/io.hpp"

#include <json.hpp>

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <sstream>

namespace lmnav::io {

using json = nlohmann::json;
using world::ActionTriple;
using world::Pose2D;

static_assert(std::endian::native == std::endian::little, "binary stores assume a little-endian host");

std::string hex_u64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

uint64_t parse_hex_u64(const std::string& s) {
    if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos)
        throw Error("parse_hex_u64: expected 16 lowercase hex digits, got '" + s + "'");
    return std::stoull(s, nullptr, 16);
}

std::string mask_to_hex(const sensor::SegmentationResult& seg) {
    static const char* digits = "0123456789abcdef";
    size_t cells = seg.mask.size();
    std::string out;
    out.reserve((cells + 7) / 8 * 2);
    uint8_t byte = 0;
    int filled = 0;
    for (size_t i = 0; i < cells; ++i) {
        byte = static_cast<uint8_t>((byte << 1) | (seg.mask[i] ? 1 : 0));
        if (++filled == 8) {
            out += digits[byte >> 4];
            out += digits[byte & 0xf];
            byte = 0;
            filled = 0;
        }
    }
    if (filled > 0) {
        byte = static_cast<uint8_t>(byte << (8 - filled));
        out += digits[byte >> 4];
        out += digits[byte & 0xf];
    }
    return out;
}

void mask_from_hex(const std::string& hex, sensor::SegmentationResult& seg) {
    size_t cells = static_cast<size_t>(seg.gridH) * static_cast<size_t>(seg.gridW);
    if (hex.size() != (cells + 7) / 8 * 2) throw Error("mask_from_hex: length does not match the grid");
    seg.mask.assign(cells, 0);
    for (size_t i = 0; i < cells; ++i) {
        char c = hex[i / 4];
        int v = c >= 'a' ? c - 'a' + 10 : c - '0';
        if (v < 0 || v > 15) throw Error("mask_from_hex: not a hex digit");
        seg.mask[i] = static_cast<uint8_t>((v >> (3 - i % 4)) & 1);
    }
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write to '" + path + "' failed");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

// ---- binary primitives ----

namespace {

template <class T>
void put(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(buf, sizeof(T));
}

template <class T>
T take(std::istream& in) {
    char buf[sizeof(T)];
    in.read(buf, sizeof(T));
    if (!in) throw Error("unexpected end of binary file");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

void put_bytes(std::ostream& out, const void* data, size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void take_bytes(std::istream& in, void* data, size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in) throw Error("unexpected end of binary file");
}

void expect_magic(std::istream& in, const char* magic, const std::string& path) {
    char buf[8] = {};
    in.read(buf, static_cast<std::streamsize>(std::strlen(magic)));
    if (!in || std::strncmp(buf, magic, std::strlen(magic)) != 0)
        throw Error("'" + path + "': bad magic, expected " + magic);
}

// ---- JSON fragments ----

json pose_to_json(const Pose2D& p) { return json::array({p.x, p.y, p.theta}); }

Pose2D pose_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw Error("pose: expected [x, y, theta]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json action_to_json(const ActionTriple& a) { return json::array({a.ax, a.ay, a.atheta}); }

ActionTriple action_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw Error("action: expected [ax, ay, atheta]");
    ActionTriple a{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
    if (a.ax < -1 || a.ax > 1 || a.ay < -1 || a.ay > 1 || a.atheta < -1 || a.atheta > 1)
        throw Error("action: components must be -1, 0 or +1");
    return a;
}

json seg_to_json(const sensor::SegmentationResult& seg) {
    return json{{"box", {seg.uMin, seg.vMin, seg.uMax, seg.vMax}},
                {"h", seg.gridH},
                {"mask", mask_to_hex(seg)},
                {"present", seg.present},
                {"view", seg.view},
                {"w", seg.gridW}};
}

sensor::SegmentationResult seg_from_json(const json& j) {
    sensor::SegmentationResult seg;
    seg.view = j.at("view").get<int>();
    seg.gridH = j.at("h").get<int>();
    seg.gridW = j.at("w").get<int>();
    if (seg.gridH < 0 || seg.gridW < 0) throw Error("segmentation: negative grid shape");
    const json& box = j.at("box");
    seg.uMin = box.at(0).get<double>();
    seg.vMin = box.at(1).get<double>();
    seg.uMax = box.at(2).get<double>();
    seg.vMax = box.at(3).get<double>();
    seg.present = j.at("present").get<bool>();
    mask_from_hex(j.at("mask").get<std::string>(), seg);
    return seg;
}

json parse_line(const std::string& line, const std::string& path, size_t lineNo) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
        throw Error("'" + path + "' line " + std::to_string(lineNo) + ": malformed JSON");
    return j;
}

}  // namespace

// ---- observation store ----

ObsWriter::ObsWriter(const std::string& path, const sensor::CameraRig& rig)
    : out_(path, std::ios::binary | std::ios::trunc),
      viewCount_(static_cast<int>(rig.views.size())),
      patchH_(rig.patchH),
      patchW_(rig.patchW),
      featureDim_(rig.featureDim) {
    if (!out_) throw Error("cannot open '" + path + "' for writing");
    put_bytes(out_, "LMOB1", 5);
    put<int32_t>(out_, viewCount_);
    put<int32_t>(out_, patchH_);
    put<int32_t>(out_, patchW_);
    put<int32_t>(out_, featureDim_);
    put<int64_t>(out_, 0);  // record count, patched on close
}

ObsWriter::~ObsWriter() {
    if (!closed_) {
        try {
            close();
        } catch (...) {
        }
    }
}

int64_t ObsWriter::append(const sensor::ObservationSet& obs) {
    if (closed_) throw Error("ObsWriter: appending after close");
    if (obs.grids.size() != static_cast<size_t>(viewCount_) || obs.segs.size() != obs.grids.size())
        throw Error("ObsWriter: observation view count does not match the rig");
    size_t gridLen = static_cast<size_t>(patchH_) * patchW_ * featureDim_;
    size_t maskLen = static_cast<size_t>(patchH_) * patchW_;

    put<double>(out_, obs.truePose.x);
    put<double>(out_, obs.truePose.y);
    put<double>(out_, obs.truePose.theta);
    for (const auto& grid : obs.grids) {
        if (grid.data.size() != gridLen) throw Error("ObsWriter: feature grid size mismatch");
        put_bytes(out_, grid.data.data(), gridLen * sizeof(float));
    }
    for (const auto& seg : obs.segs) {
        if (seg.mask.size() != maskLen) throw Error("ObsWriter: segmentation size mismatch");
        put<uint8_t>(out_, seg.present ? 1 : 0);
        put<double>(out_, seg.uMin);
        put<double>(out_, seg.vMin);
        put<double>(out_, seg.uMax);
        put<double>(out_, seg.vMax);
        put_bytes(out_, seg.mask.data(), maskLen);
    }
    if (!out_) throw Error("ObsWriter: write failed");
    return count_++;
}

void ObsWriter::close() {
    if (closed_) return;
    closed_ = true;
    out_.seekp(5 + 4 * sizeof(int32_t));
    put<int64_t>(out_, count_);
    out_.close();
    if (out_.fail()) throw Error("ObsWriter: closing the store failed");
}

ObsReader::ObsReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw Error("cannot open '" + path + "'");
    expect_magic(in_, "LMOB1", path);
    viewCount_ = take<int32_t>(in_);
    patchH_ = take<int32_t>(in_);
    patchW_ = take<int32_t>(in_);
    featureDim_ = take<int32_t>(in_);
    count_ = take<int64_t>(in_);
    if (viewCount_ < 1 || patchH_ < 1 || patchW_ < 1 || featureDim_ < 1 || count_ < 0)
        throw Error("'" + path + "': corrupt observation store header");
    headerSize_ = 5 + 4 * sizeof(int32_t) + sizeof(int64_t);
    int64_t gridBytes = static_cast<int64_t>(patchH_) * patchW_ * featureDim_ * sizeof(float);
    int64_t segBytes = 1 + 4 * sizeof(double) + static_cast<int64_t>(patchH_) * patchW_;
    recordSize_ = 3 * sizeof(double) + viewCount_ * (gridBytes + segBytes);
}

sensor::ObservationSet ObsReader::read(int64_t index) {
    if (index < 0 || index >= count_) throw Error("ObsReader: record index out of range");
    in_.seekg(headerSize_ + index * recordSize_);
    sensor::ObservationSet obs;
    obs.truePose.x = take<double>(in_);
    obs.truePose.y = take<double>(in_);
    obs.truePose.theta = take<double>(in_);
    size_t gridLen = static_cast<size_t>(patchH_) * patchW_ * featureDim_;
    size_t maskLen = static_cast<size_t>(patchH_) * patchW_;
    obs.grids.resize(static_cast<size_t>(viewCount_));
    for (int v = 0; v < viewCount_; ++v) {
        obs.grids[static_cast<size_t>(v)].view = v;
        obs.grids[static_cast<size_t>(v)].data.resize(gridLen);
        take_bytes(in_, obs.grids[static_cast<size_t>(v)].data.data(), gridLen * sizeof(float));
    }
    obs.segs.resize(static_cast<size_t>(viewCount_));
    for (int v = 0; v < viewCount_; ++v) {
        auto& seg = obs.segs[static_cast<size_t>(v)];
        seg.view = v;
        seg.gridH = patchH_;
        seg.gridW = patchW_;
        seg.present = take<uint8_t>(in_) != 0;
        seg.uMin = take<double>(in_);
        seg.vMin = take<double>(in_);
        seg.uMax = take<double>(in_);
        seg.vMax = take<double>(in_);
        seg.mask.resize(maskLen);
        take_bytes(in_, seg.mask.data(), maskLen);
    }
    return obs;
}

// ---- trajectories ----

void save_trajectories(const std::string& path, const std::vector<expert::TrajectoryRecord>& trajectories,
                       uint64_t configHash, uint64_t seed) {
    std::string out;
    out += json{{"configHash", hex_u64(configHash)}, {"format", "lmnav-trajectories"}, {"seed", hex_u64(seed)}}
               .dump();
    out += '\n';
    for (const auto& traj : trajectories) {
        out += json{{"goal", pose_to_json(traj.goalPose)},
                    {"instance", traj.instanceId},
                    {"start", pose_to_json(traj.startPose)},
                    {"steps", traj.length()},
                    {"traj", traj.trajectoryId}}
                   .dump();
        out += '\n';
        for (size_t i = 0; i < traj.steps.size(); ++i) {
            const auto& s = traj.steps[i];
            out += json{{"action", action_to_json(s.action)},
                        {"obs", s.obsIndex},
                        {"pose", pose_to_json(s.pose)},
                        {"step", i}}
                       .dump();
            out += '\n';
        }
    }
    write_text_file(path, out);
}

TrajectoryFile load_trajectories(const std::string& path) {
    std::istringstream in(read_text_file(path));
    TrajectoryFile file;
    std::string line;
    size_t lineNo = 0;
    if (!std::getline(in, line)) throw Error("'" + path + "': empty trajectory file");
    json header = parse_line(line, path, ++lineNo);
    if (header.value("format", "") != "lmnav-trajectories")
        throw Error("'" + path + "': not a trajectory file");
    file.configHash = parse_hex_u64(header.at("configHash").get<std::string>());
    file.seed = parse_hex_u64(header.at("seed").get<std::string>());

    while (std::getline(in, line)) {
        json j = parse_line(line, path, ++lineNo);
        if (j.contains("traj") && j.contains("start")) {
            expert::TrajectoryRecord traj;
            traj.trajectoryId = j.at("traj").get<int>();
            traj.startPose = pose_from_json(j.at("start"));
            traj.goalPose = pose_from_json(j.at("goal"));
            traj.instanceId = j.at("instance").get<std::string>();
            traj.steps.reserve(j.at("steps").get<size_t>());
            file.trajectories.push_back(std::move(traj));
        } else {
            if (file.trajectories.empty())
                throw Error("'" + path + "' line " + std::to_string(lineNo) + ": step before any trajectory");
            expert::Step s;
            s.pose = pose_from_json(j.at("pose"));
            s.action = action_from_json(j.at("action"));
            s.obsIndex = j.at("obs").get<int64_t>();
            auto& traj = file.trajectories.back();
            if (j.at("step").get<size_t>() != traj.steps.size())
                throw Error("'" + path + "' line " + std::to_string(lineNo) + ": step index out of order");
            traj.steps.push_back(s);
        }
    }
    for (const auto& traj : file.trajectories)
        if (traj.steps.empty()) throw Error("'" + path + "': trajectory without steps");
    return file;
}

// ---- dataset manifest ----

void save_dataset_manifest(const std::string& path, const DatasetManifest& manifest) {
    json samples = json::array();
    for (const auto& s : manifest.samples)
        samples.push_back({s.trajectoryId, s.t, s.tprime, s.label.ax, s.label.ay, s.label.atheta});
    json j{{"auxThresholds",
            {{"bboxAreaHi", manifest.auxThresholds.bboxAreaHi},
             {"bboxAreaLo", manifest.auxThresholds.bboxAreaLo},
             {"comRadius", manifest.auxThresholds.comRadius}}},
           {"configHash", hex_u64(manifest.configHash)},
           {"divergences", manifest.divergences},
           {"format", "lmnav-dataset"},
           {"meanTrajectoryLength", manifest.meanTrajectoryLength},
           {"obsStoreFile", manifest.obsStoreFile},
           {"sampleCount", manifest.samples.size()},
           {"samples", std::move(samples)},
           {"seed", hex_u64(manifest.seed)},
           {"trajectoriesFile", manifest.trajectoriesFile},
           {"trajectoryCount", manifest.trajectoryCount}};
    write_text_file(path, j.dump() + "\n");
}

DatasetManifest load_dataset_manifest(const std::string& path) {
    json j = json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded()) throw Error("'" + path + "': malformed JSON");
    if (j.value("format", "") != "lmnav-dataset") throw Error("'" + path + "': not a dataset manifest");
    DatasetManifest m;
    m.configHash = parse_hex_u64(j.at("configHash").get<std::string>());
    m.seed = parse_hex_u64(j.at("seed").get<std::string>());
    m.obsStoreFile = j.at("obsStoreFile").get<std::string>();
    m.trajectoriesFile = j.at("trajectoriesFile").get<std::string>();
    m.trajectoryCount = j.at("trajectoryCount").get<int>();
    m.divergences = j.at("divergences").get<int>();
    m.meanTrajectoryLength = j.at("meanTrajectoryLength").get<double>();
    const json& aux = j.at("auxThresholds");
    m.auxThresholds.bboxAreaLo = aux.at("bboxAreaLo").get<double>();
    m.auxThresholds.bboxAreaHi = aux.at("bboxAreaHi").get<double>();
    m.auxThresholds.comRadius = aux.at("comRadius").get<double>();
    for (const json& row : j.at("samples")) {
        if (!row.is_array() || row.size() != 6)
            throw Error("'" + path + "': sample rows are [traj, t, t', ax, ay, atheta]");
        expert::Sample s;
        s.trajectoryId = row[0].get<int>();
        s.t = row[1].get<int>();
        s.tprime = row[2].get<int>();
        s.label = {row[3].get<int>(), row[4].get<int>(), row[5].get<int>()};
        if (s.tprime <= s.t) throw Error("'" + path + "': sample with t' <= t");
        m.samples.push_back(s);
    }
    if (m.samples.size() != j.at("sampleCount").get<size_t>())
        throw Error("'" + path + "': sampleCount disagrees with the sample list");
    return m;
}

// ---- checkpoints ----

namespace {

void put_spec(std::ostream& out, const nn::NetSpec& spec) {
    put<uint32_t>(out, static_cast<uint32_t>(spec.layers.size()));
    for (const auto& layer : spec.layers) {
        put<uint32_t>(out, static_cast<uint32_t>(layer.inputDim));
        put<uint32_t>(out, static_cast<uint32_t>(layer.outputDim));
        put<uint8_t>(out, static_cast<uint8_t>(layer.activation));
    }
}

void check_spec(std::istream& in, const nn::NetSpec& expect, const std::string& path) {
    uint32_t n = take<uint32_t>(in);
    if (n != expect.layers.size()) throw Error("'" + path + "': layer count disagrees with the shape header");
    for (const auto& layer : expect.layers) {
        uint32_t inDim = take<uint32_t>(in);
        uint32_t outDim = take<uint32_t>(in);
        uint8_t act = take<uint8_t>(in);
        if (inDim != static_cast<uint32_t>(layer.inputDim) || outDim != static_cast<uint32_t>(layer.outputDim) ||
            act != static_cast<uint8_t>(layer.activation))
            throw Error("'" + path + "': layer spec disagrees with the shape header");
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const decoders::DecoderParams& params, uint64_t configHash,
                     uint64_t seed) {
    if (params.flat.size() != params.param_count())
        throw Error("save_checkpoint: parameter vector does not match the declared shape");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    put_bytes(out, "LMNV1", 5);
    put<uint8_t>(out, static_cast<uint8_t>(params.variant));
    const auto& c = params.cfg;
    put<int32_t>(out, c.poolGrid);
    put<int32_t>(out, c.featureDim);
    put<int32_t>(out, c.viewCount);
    put<int32_t>(out, c.boxHidden);
    put<int32_t>(out, c.boxDim);
    put<int32_t>(out, c.headHidden);
    put<int32_t>(out, c.attnHeads);
    put<uint8_t>(out, c.poolMax ? 1 : 0);
    put<uint8_t>(out, static_cast<uint8_t>(c.activation));
    put<uint64_t>(out, configHash);
    put<uint64_t>(out, seed);
    put_spec(out, c.box_spec());
    put_spec(out, c.head_spec(params.variant));
    put<uint64_t>(out, params.flat.size());
    for (double v : params.flat) put<float>(out, static_cast<float>(v));
    if (!out) throw Error("write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    expect_magic(in, "LMNV1", path);
    Checkpoint ckpt;
    ckpt.params.variant = static_cast<decoders::Variant>(take<uint8_t>(in));
    auto& c = ckpt.params.cfg;
    c.poolGrid = take<int32_t>(in);
    c.featureDim = take<int32_t>(in);
    c.viewCount = take<int32_t>(in);
    c.boxHidden = take<int32_t>(in);
    c.boxDim = take<int32_t>(in);
    c.headHidden = take<int32_t>(in);
    c.attnHeads = take<int32_t>(in);
    c.poolMax = take<uint8_t>(in) != 0;
    c.activation = static_cast<nn::Activation>(take<uint8_t>(in));
    c.validate();
    ckpt.configHash = take<uint64_t>(in);
    ckpt.seed = take<uint64_t>(in);
    check_spec(in, c.box_spec(), path);
    check_spec(in, c.head_spec(ckpt.params.variant), path);
    uint64_t n = take<uint64_t>(in);
    if (n != ckpt.params.param_count()) throw Error("'" + path + "': parameter count disagrees with the shape");
    ckpt.params.flat.resize(n);
    for (uint64_t i = 0; i < n; ++i) ckpt.params.flat[i] = static_cast<double>(take<float>(in));
    return ckpt;
}

// ---- rollout logs ----

void save_rollout_logs(const std::string& path, const RolloutLogFile& file) {
    std::string out;
    out += json{{"auxStop", file.auxStop},
                {"configHash", hex_u64(file.configHash)},
                {"count", file.logs.size()},
                {"format", "lmnav-rollouts"},
                {"instanceSet", file.instanceSet},
                {"seed", hex_u64(file.seed)}}
               .dump();
    out += '\n';
    for (const auto& log : file.logs) {
        out += json{{"finalFrontSeg", seg_to_json(log.finalFrontSeg)},
                    {"finalPose", pose_to_json(log.finalPose)},
                    {"goalFrontSeg", seg_to_json(log.goalFrontSeg)},
                    {"goalPose", pose_to_json(log.goalPose)},
                    {"grid", log.gridName},
                    {"instance", log.instanceId},
                    {"policy", log.policyName},
                    {"seed", hex_u64(log.seed)},
                    {"startIndex", log.startIndex},
                    {"startPose", pose_to_json(log.startPose)},
                    {"steps", log.steps.size()},
                    {"termination", rollout::termination_name(log.termination)},
                    {"wallSteps", log.wallSteps}}
                   .dump();
        out += '\n';
        for (const auto& s : log.steps) {
            json stats = json::array();
            for (const auto& v : s.segStats)
                stats.push_back({v.bboxArea, v.present, v.comValid, v.com.u, v.com.v});
            out += json{{"action", action_to_json(s.action)},
                        {"logits", s.logits},
                        {"pose", pose_to_json(s.pose)},
                        {"segStats", std::move(stats)}}
                       .dump();
            out += '\n';
        }
    }
    write_text_file(path, out);
}

RolloutLogFile load_rollout_logs(const std::string& path) {
    std::istringstream in(read_text_file(path));
    RolloutLogFile file;
    std::string line;
    size_t lineNo = 0;
    if (!std::getline(in, line)) throw Error("'" + path + "': empty rollout log");
    json header = parse_line(line, path, ++lineNo);
    if (header.value("format", "") != "lmnav-rollouts") throw Error("'" + path + "': not a rollout log file");
    file.configHash = parse_hex_u64(header.at("configHash").get<std::string>());
    file.seed = parse_hex_u64(header.at("seed").get<std::string>());
    file.instanceSet = header.at("instanceSet").get<std::string>();
    file.auxStop = header.at("auxStop").get<bool>();
    size_t count = header.at("count").get<size_t>();

    for (size_t r = 0; r < count; ++r) {
        if (!std::getline(in, line))
            throw Error("'" + path + "' line " + std::to_string(lineNo) + ": truncated rollout list");
        json j = parse_line(line, path, ++lineNo);
        rollout::RolloutLog log;
        log.startIndex = j.at("startIndex").get<int>();
        log.gridName = j.at("grid").get<std::string>();
        log.policyName = j.at("policy").get<std::string>();
        log.instanceId = j.at("instance").get<std::string>();
        log.seed = parse_hex_u64(j.at("seed").get<std::string>());
        log.startPose = pose_from_json(j.at("startPose"));
        log.goalPose = pose_from_json(j.at("goalPose"));
        log.finalPose = pose_from_json(j.at("finalPose"));
        log.termination = rollout::termination_from_name(j.at("termination").get<std::string>());
        log.wallSteps = j.at("wallSteps").get<int>();
        log.finalFrontSeg = seg_from_json(j.at("finalFrontSeg"));
        log.goalFrontSeg = seg_from_json(j.at("goalFrontSeg"));
        size_t steps = j.at("steps").get<size_t>();
        if (static_cast<size_t>(log.wallSteps) != steps)
            throw Error("'" + path + "' line " + std::to_string(lineNo) + ": wallSteps disagrees with steps");
        for (size_t i = 0; i < steps; ++i) {
            if (!std::getline(in, line))
                throw Error("'" + path + "' line " + std::to_string(lineNo) + ": truncated step list");
            json sj = parse_line(line, path, ++lineNo);
            rollout::StepRecord rec;
            rec.pose = pose_from_json(sj.at("pose"));
            rec.action = action_from_json(sj.at("action"));
            const json& logits = sj.at("logits");
            if (!logits.is_array() || logits.size() != 9)
                throw Error("'" + path + "' line " + std::to_string(lineNo) + ": logits must have 9 entries");
            for (size_t k = 0; k < 9; ++k) rec.logits[k] = logits[k].get<double>();
            for (const json& v : sj.at("segStats")) {
                if (!v.is_array() || v.size() != 5)
                    throw Error("'" + path + "' line " + std::to_string(lineNo) + ": malformed segStats");
                decoders::ViewAuxStats stats;
                stats.bboxArea = v[0].get<double>();
                stats.present = v[1].get<bool>();
                stats.comValid = v[2].get<bool>();
                stats.com.u = v[3].get<double>();
                stats.com.v = v[4].get<double>();
                rec.segStats.push_back(stats);
            }
            log.steps.push_back(std::move(rec));
        }
        file.logs.push_back(std::move(log));
    }
    if (std::getline(in, line) && !line.empty())
        throw Error("'" + path + "': trailing content after the declared rollouts");
    return file;
}

// ---- report ----

std::string report_to_json(const metrics::MetricReport& report, uint64_t configHash) {
    json rollouts = json::array();
    for (const auto& m : report.rollouts) {
        json row{{"dCoM", m.comValid ? json(m.dCom) : json(nullptr)},
                 {"edgeAligned", m.edgeAligned},
                 {"objectAligned", m.objectAligned},
                 {"orientationErrorDeg", m.orientationErrorDeg},
                 {"startIndex", m.startIndex},
                 {"termination", m.termination},
                 {"translationError", m.translationError},
                 {"translationOk", m.translationOk}};
        rollouts.push_back(std::move(row));
    }
    json j{{"comRadius", report.comRadius},
           {"configHash", hex_u64(configHash)},
           {"counts", {{"edge", report.edgeCount}, {"object", report.objectCount}, {"total", report.total}}},
           {"format", "lmnav-report"},
           {"grid", report.gridName},
           {"rates", {{"edge", report.edgeRate}, {"object", report.objectRate}}},
           {"rollouts", std::move(rollouts)}};
    return j.dump(2) + "\n";
}

}  // namespace lmnav::io
