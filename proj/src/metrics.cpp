#include "lmnav/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "lmnav/rollout.hpp"

namespace lmnav::metrics {

ComPoint mask_com(const sensor::SegmentationResult& seg) {
    double sumU = 0.0, sumV = 0.0;
    int64_t n = 0;
    for (int r = 0; r < seg.gridH; ++r) {
        for (int c = 0; c < seg.gridW; ++c) {
            if (seg.cell(r, c)) {
                sumU += c;
                sumV += r;
                n++;
            }
        }
    }
    if (n == 0) throw Error("mask_com: empty mask");
    return {sumU / static_cast<double>(n), sumV / static_cast<double>(n)};
}

double d_com(const ComPoint& a, const ComPoint& b) { return std::hypot(a.u - b.u, a.v - b.v); }

EdgeFlags edge_alignment(const world::Pose2D& finalPose, const world::Pose2D& goalPose,
                         const AlignmentThresholds& thresholds) {
    EdgeFlags flags;
    double dist = std::hypot(finalPose.x - goalPose.x, finalPose.y - goalPose.y);
    flags.translationOk = dist <= thresholds.translationTol;
    double dtheta = std::abs(world::normalize_angle(finalPose.theta - goalPose.theta));
    flags.edgeAligned = flags.translationOk && dtheta <= thresholds.orientationTol;
    return flags;
}

bool object_alignment(const sensor::SegmentationResult& finalSeg,
                      const sensor::SegmentationResult& goalSeg, double comRadius,
                      bool translationOk) {
    if (!translationOk) return false;
    if (finalSeg.set_cells() == 0 || goalSeg.set_cells() == 0) return false;
    return d_com(mask_com(finalSeg), mask_com(goalSeg)) <= comRadius;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw Error("percentile: no values");
    if (p < 0.0 || p > 100.0) throw Error("percentile: p outside [0,100]");
    std::sort(values.begin(), values.end());
    double h = (static_cast<double>(values.size()) - 1.0) * p / 100.0;
    size_t lo = static_cast<size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace

MetricReport aggregate(const std::vector<rollout::RolloutLog>& logs, double comRadius,
                       const AlignmentThresholds& thresholds) {
    if (logs.empty()) throw Error("aggregate: no rollout logs");
    MetricReport report;
    report.comRadius = comRadius;
    report.gridName = logs.front().gridName;

    for (const auto& log : logs) {
        if (log.gridName != report.gridName)
            throw Error("aggregate: mixed start grids ('" + report.gridName + "' vs '" + log.gridName + "')");
        RolloutMetrics m;
        m.startIndex = log.startIndex;
        m.translationError = std::hypot(log.finalPose.x - log.goalPose.x, log.finalPose.y - log.goalPose.y);
        m.orientationErrorDeg = rad2deg(std::abs(world::normalize_angle(log.finalPose.theta - log.goalPose.theta)));
        EdgeFlags flags = edge_alignment(log.finalPose, log.goalPose, thresholds);
        m.translationOk = flags.translationOk;
        m.edgeAligned = flags.edgeAligned;
        m.comValid = log.finalFrontSeg.set_cells() > 0 && log.goalFrontSeg.set_cells() > 0;
        if (m.comValid) m.dCom = d_com(mask_com(log.finalFrontSeg), mask_com(log.goalFrontSeg));
        m.objectAligned = object_alignment(log.finalFrontSeg, log.goalFrontSeg, comRadius, flags.translationOk);
        m.termination = rollout::termination_name(log.termination);
        // An episode that ran out of steps never stopped: count it as a miss
        // (the errors above still describe where it ended up).
        if (log.termination == rollout::Termination::MaxSteps)
            m.translationOk = m.edgeAligned = m.objectAligned = false;
        report.rollouts.push_back(std::move(m));
    }
    std::stable_sort(report.rollouts.begin(), report.rollouts.end(),
                     [](const RolloutMetrics& a, const RolloutMetrics& b) { return a.startIndex < b.startIndex; });

    for (const auto& m : report.rollouts) {
        if ((m.edgeAligned && !m.translationOk) || (m.objectAligned && !m.translationOk))
            throw Error("aggregate: alignment flag set without translation success");
        report.edgeCount += m.edgeAligned ? 1 : 0;
        report.objectCount += m.objectAligned ? 1 : 0;
    }
    report.total = static_cast<int>(report.rollouts.size());
    report.edgeRate = static_cast<double>(report.edgeCount) / static_cast<double>(report.total);
    report.objectRate = static_cast<double>(report.objectCount) / static_cast<double>(report.total);
    return report;
}

std::string report_csv(const MetricReport& report) {
    std::string out = "startIndex,translationError_m,orientationError_deg,dCoM_cells,translationOk,edgeAligned,objectAligned\n";
    for (const auto& m : report.rollouts) {
        out += std::to_string(m.startIndex);
        out += ',' + fmt("%.6f", m.translationError);
        out += ',' + fmt("%.6f", m.orientationErrorDeg);
        out += ',';
        out += m.comValid ? fmt("%.6f", m.dCom) : "nan";
        out += m.translationOk ? ",1" : ",0";
        out += m.edgeAligned ? ",1" : ",0";
        out += m.objectAligned ? ",1" : ",0";
        out += '\n';
    }
    return out;
}

std::string report_svg(const MetricReport& report) {
    struct Bar {
        const char* label;
        double rate;
        const char* fill;
        int x;
    };
    const Bar bars[2] = {
        {"edge", report.edgeRate, "#4878a8", 70},
        {"object", report.objectRate, "#c8784a", 210},
    };
    const int width = 360, height = 260, baseline = 210, barW = 80, maxH = 160;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
           std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) + "\">\n";
    svg += "  <rect width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) + "\" fill=\"#ffffff\"/>\n";
    svg += "  <text x=\"180\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">success rates (" +
           report.gridName + " grid, n=" + std::to_string(report.total) + ")</text>\n";
    for (const auto& b : bars) {
        int h = static_cast<int>(std::lround(b.rate * maxH));
        int y = baseline - h;
        svg += "  <rect x=\"" + std::to_string(b.x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
               std::to_string(barW) + "\" height=\"" + std::to_string(h) + "\" fill=\"" + b.fill + "\"/>\n";
        svg += "  <text x=\"" + std::to_string(b.x + barW / 2) + "\" y=\"" + std::to_string(y - 6) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
               fmt("%.2f", b.rate * 100.0) + "%</text>\n";
        svg += "  <text x=\"" + std::to_string(b.x + barW / 2) + "\" y=\"" + std::to_string(baseline + 20) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + b.label + "</text>\n";
    }
    svg += "  <line x1=\"40\" y1=\"" + std::to_string(baseline) + "\" x2=\"320\" y2=\"" + std::to_string(baseline) +
           "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg += "</svg>\n";
    return svg;
}

}  // namespace lmnav::metrics
