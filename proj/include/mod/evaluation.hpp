#ifndef MOD_EVALUATION_HPP
#define MOD_EVALUATION_HPP

#include <cstdint>
#include <map>
#include <sstream>
#include <tuple>
#include <set>
#include <string>
#include <vector>

#include "mod/dataset.hpp"
#include "mod/localization.hpp"

namespace mod {

struct RankedList {
    std::uint32_t class_id = 0;
    std::vector<int> relevance;  // rel(k), rank-ascending, entries in {0,1}
};

// AP@K with N_c taken from ground truth; 0 by convention when N_c = 0.
inline double average_precision_at_k(const RankedList& list, std::size_t n_positive,
                                     std::size_t k_cutoff) {
    if (n_positive == 0) return 0.0;
    double sum = 0;
    std::size_t hits = 0;
    const std::size_t limit = std::min(k_cutoff, list.relevance.size());
    for (std::size_t k = 0; k < limit; ++k) {
        const int rel = list.relevance[k];
        if (rel != 0 && rel != 1)
            throw DomainError("relevance flag must be 0 or 1, got " + std::to_string(rel));
        if (rel) {
            ++hits;
            sum += double(hits) / double(k + 1);
        }
    }
    return sum / double(n_positive);
}

// Unweighted mean of per-class AP@K; zero-positive classes contribute 0.
inline double map_at_k(const std::vector<RankedList>& lists,
                       const std::vector<std::size_t>& n_positive,
                       std::size_t k_cutoff = 100000) {
    if (lists.empty()) throw ConfigError("map_at_k needs at least one class");
    if (lists.size() != n_positive.size())
        throw ShapeError("map_at_k: lists vs n_positive count mismatch");
    double sum = 0;
    for (std::size_t c = 0; c < lists.size(); ++c)
        sum += average_precision_at_k(lists[c], n_positive[c], k_cutoff);
    return sum / double(lists.size());
}

struct EvaluationReport {
    double map = 0;
    std::vector<double> per_class_ap;
    std::vector<std::size_t> per_class_positives;
};

// Scores a localization run against ground-truth segment labels.
inline EvaluationReport evaluate_rankings(
    const std::map<std::uint32_t, std::vector<RankedEntry>>& rankings,
    const std::vector<SegmentLabel>& ground_truth, std::size_t class_count,
    std::size_t k_cutoff = 100000) {
    if (class_count == 0) throw ConfigError("class_count must be positive");
    std::set<std::tuple<std::string, std::uint32_t, std::uint32_t>> positives;
    std::vector<std::size_t> n_positive(class_count, 0);
    for (const auto& l : ground_truth) {
        if (l.class_id >= class_count)
            throw DomainError("ground-truth class id out of range: " + std::to_string(l.class_id));
        if (l.positive && positives.insert({l.video_id, l.start_frame, l.class_id}).second)
            ++n_positive[l.class_id];
    }

    EvaluationReport report;
    report.per_class_positives = n_positive;
    std::vector<RankedList> lists(class_count);
    for (std::uint32_t c = 0; c < class_count; ++c) {
        lists[c].class_id = c;
        auto it = rankings.find(c);
        if (it == rankings.end()) continue;
        for (const auto& e : it->second)
            lists[c].relevance.push_back(
                positives.count({e.video_id, e.start_frame, c}) ? 1 : 0);
    }
    for (std::uint32_t c = 0; c < class_count; ++c)
        report.per_class_ap.push_back(average_precision_at_k(lists[c], n_positive[c], k_cutoff));
    report.map = map_at_k(lists, n_positive, k_cutoff);
    return report;
}

// Renders the per-step distillation-loss trajectory of the training log as a
// simple SVG line chart (Fig.-3-style diagnostic; expected to decrease, then
// increase as the label losses keep falling — observed, never asserted).
inline std::string render_distill_plot_svg(const std::string& log_csv,
                                           const std::string& node_path = "root") {
    std::istringstream in(log_csv);
    std::string line;
    if (!std::getline(in, line) || line != "step,node_path,label_loss,distill_loss,reg_loss")
        throw FormatError("bad training log header");
    std::vector<std::pair<double, double>> points;  // (step, distill_loss)
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string step_s, path, label_s, distill_s;
        std::getline(ss, step_s, ',');
        std::getline(ss, path, ',');
        std::getline(ss, label_s, ',');
        std::getline(ss, distill_s, ',');
        if (path == node_path) points.emplace_back(std::stod(step_s), std::stod(distill_s));
    }
    if (points.empty()) throw FormatError("no rows for node '" + node_path + "' in training log");

    double xmin = points.front().first, xmax = points.back().first;
    double ymin = points[0].second, ymax = points[0].second;
    for (const auto& [x, y] : points) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;

    const double W = 640, H = 360, pad = 40;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << "distillation loss, node " << node_path << "</text>\n<polyline fill=\"none\" "
        << "stroke=\"#d95f02\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : points) {
        const double px = pad + (x - xmin) / (xmax - xmin) * (W - 2 * pad);
        const double py = H - pad - (y - ymin) / (ymax - ymin) * (H - 2 * pad);
        svg << px << ',' << py << ' ';
    }
    svg << "\"/>\n<text x=\"" << pad << "\" y=\"" << H - 8 << "\" font-size=\"12\">step "
        << xmin << "</text>\n<text x=\"" << W - pad << "\" y=\"" << H - 8
        << "\" text-anchor=\"end\" font-size=\"12\">step " << xmax << "</text>\n</svg>\n";
    return svg.str();
}

}  // namespace mod

#endif  // MOD_EVALUATION_HPP
