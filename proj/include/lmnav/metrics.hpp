#pragma once

#include <string>
#include <vector>

#include "lmnav/geometry.hpp"
#include "lmnav/sensor.hpp"

// Alignment metrics over rollout outcomes: mask center-of-mass statistics,
// the two success criteria (edge and object alignment), and suite-level
// aggregation into a report.

namespace lmnav::rollout {
struct RolloutLog;
}

namespace lmnav::metrics {

/// Continuous patch-grid coordinates (u = column, v = row).
struct ComPoint {
    double u = 0.0;
    double v = 0.0;
};

/// Mean set-cell coordinate of a segmentation mask. Throws Error on an empty
/// mask — callers decide whether that means failure or misuse.
ComPoint mask_com(const sensor::SegmentationResult& seg);

/// Euclidean distance in cells.
double d_com(const ComPoint& a, const ComPoint& b);

struct AlignmentThresholds {
    double translationTol = 0.3;                 // meters
    double orientationTol = deg2rad(8.0);       // radians
};

struct EdgeFlags {
    bool translationOk = false;
    bool edgeAligned = false;
};

/// Position error against the goal within translationTol, and heading error
/// within orientationTol on top of that. Both bounds inclusive.
EdgeFlags edge_alignment(const world::Pose2D& finalPose, const world::Pose2D& goalPose,
                         const AlignmentThresholds& thresholds = {});

/// Object alignment: translation ok, both masks non-empty, and the final mask
/// CoM within comRadius cells of the goal mask CoM (inclusive). An empty
/// final mask means the target was lost — failure, not an error.
bool object_alignment(const sensor::SegmentationResult& finalSeg,
                      const sensor::SegmentationResult& goalSeg, double comRadius,
                      bool translationOk);

/// Linearly interpolated percentile (the common spreadsheet definition),
/// p in [0, 100]. Throws on empty input.
double percentile(std::vector<double> values, double p);

struct RolloutMetrics {
    int startIndex = 0;
    double translationError = 0.0;     // meters
    double orientationErrorDeg = 0.0;  // absolute degrees
    double dCom = 0.0;                 // cells; valid only if comValid
    bool comValid = false;
    bool translationOk = false;
    bool edgeAligned = false;
    bool objectAligned = false;
    std::string termination;
};

struct MetricReport {
    std::vector<RolloutMetrics> rollouts;
    int total = 0;
    int edgeCount = 0;
    int objectCount = 0;
    double edgeRate = 0.0;
    double objectRate = 0.0;
    double comRadius = 0.0;
    std::string gridName;
};

/// Score a suite of rollout logs against one threshold set. All logs must
/// come from the same start grid; mixed suites are a validation error.
/// Episodes that ran into the step cap count as misses regardless of where
/// they ended up — success means stopping, not passing through.
MetricReport aggregate(const std::vector<rollout::RolloutLog>& logs, double comRadius,
                       const AlignmentThresholds& thresholds = {});

/// One row per rollout plus no header magic — plain spreadsheet food.
std::string report_csv(const MetricReport& report);

/// Standalone bar chart of the two success rates.
std::string report_svg(const MetricReport& report);

}  // namespace lmnav::metrics
