#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "lmnav/expert.hpp"
#include "lmnav/metrics.hpp"
#include "lmnav/rollout.hpp"

// Artifact formats. Binary stores are little-endian with short magic strings;
// everything else is JSON (whole-file or line-delimited). Every artifact
// embeds the config hash that produced it, and nothing embeds a timestamp —
// identical runs must produce identical bytes.

namespace lmnav::io {

std::string hex_u64(uint64_t v);
uint64_t parse_hex_u64(const std::string& s);

/// Mask cells packed row-major, eight cells per byte, MSB first.
std::string mask_to_hex(const sensor::SegmentationResult& seg);
void mask_from_hex(const std::string& hex, sensor::SegmentationResult& seg);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
bool file_exists(const std::string& path);

// ---- observation store ("LMOB1") ----
//
// Fixed-size records: true pose, per-view feature grids (f32), per-view
// target segmentations. Random access by record index.

class ObsWriter {
  public:
    ObsWriter(const std::string& path, const sensor::CameraRig& rig);
    ~ObsWriter();

    /// Appends one observation and returns its record index.
    int64_t append(const sensor::ObservationSet& obs);
    int64_t count() const { return count_; }
    /// Patches the record count into the header. Called by the destructor
    /// if needed; explicit close surfaces write errors.
    void close();

  private:
    std::ofstream out_;
    int64_t count_ = 0;
    int viewCount_, patchH_, patchW_, featureDim_;
    bool closed_ = false;
};

class ObsReader {
  public:
    explicit ObsReader(const std::string& path);

    int64_t count() const { return count_; }
    int view_count() const { return viewCount_; }
    int patch_h() const { return patchH_; }
    int patch_w() const { return patchW_; }
    int feature_dim() const { return featureDim_; }

    sensor::ObservationSet read(int64_t index);

  private:
    std::ifstream in_;
    int64_t count_ = 0;
    int viewCount_ = 0, patchH_ = 0, patchW_ = 0, featureDim_ = 0;
    int64_t recordSize_ = 0, headerSize_ = 0;
};

// ---- trajectories (line-delimited JSON) ----
//
// First line: file header with config hash and seed. Then per trajectory one
// header line (start, goal, instance) followed by one line per step (pose,
// action, observation index).

struct TrajectoryFile {
    std::vector<expert::TrajectoryRecord> trajectories;
    uint64_t configHash = 0;
    uint64_t seed = 0;
};

void save_trajectories(const std::string& path, const std::vector<expert::TrajectoryRecord>& trajectories,
                       uint64_t configHash, uint64_t seed);
TrajectoryFile load_trajectories(const std::string& path);

// ---- dataset manifest (JSON) ----

struct DatasetManifest {
    std::vector<expert::Sample> samples;
    rollout::AuxThresholds auxThresholds;
    std::string obsStoreFile;      // basenames, resolved against the manifest's directory
    std::string trajectoriesFile;
    int trajectoryCount = 0;
    int divergences = 0;
    double meanTrajectoryLength = 0.0;
    uint64_t configHash = 0;
    uint64_t seed = 0;
};

void save_dataset_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest load_dataset_manifest(const std::string& path);

// ---- decoder checkpoints ("LMNV1") ----
//
// Magic, variant + decoder shape descriptor, provenance, the layer dims and
// activation bytes of both MLPs (redundant with the shape, verified on load),
// then all parameters as little-endian f32 in flat order.

void save_checkpoint(const std::string& path, const decoders::DecoderParams& params, uint64_t configHash,
                     uint64_t seed);

struct Checkpoint {
    decoders::DecoderParams params;
    uint64_t configHash = 0;
    uint64_t seed = 0;
};

Checkpoint load_checkpoint(const std::string& path);

// ---- rollout logs (line-delimited JSON) ----
//
// File header, then per rollout a summary line (poses, termination, masks)
// followed by one line per step.

struct RolloutLogFile {
    std::vector<rollout::RolloutLog> logs;
    uint64_t configHash = 0;
    uint64_t seed = 0;
    std::string instanceSet;  // "seen" | "unseen"
    bool auxStop = false;
};

void save_rollout_logs(const std::string& path, const RolloutLogFile& file);
RolloutLogFile load_rollout_logs(const std::string& path);

// ---- evaluation report (JSON text) ----

std::string report_to_json(const metrics::MetricReport& report, uint64_t configHash);

}  // namespace lmnav::io
