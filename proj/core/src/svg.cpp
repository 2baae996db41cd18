#include "bet/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "bet/errors.hpp"

namespace bet {

namespace {

const char* mode_color(ModeLabel m) {
    switch (m) {
        case ModeLabel::Up: return "#1f77b4";
        case ModeLabel::Down: return "#d62728";
        case ModeLabel::Diagonal: return "#2ca02c";
        case ModeLabel::UpFirst: return "#1f77b4";
        case ModeLabel::RightFirst: return "#d62728";
        case ModeLabel::Undetermined: return "#7f7f7f";
    }
    return "#000000";
}

struct Mapper {
    double min_x, min_y, max_x, max_y;
    static constexpr double kScale = 60.0;
    static constexpr double kMargin = 40.0;

    double px(double x) const { return kMargin + (x - min_x) * kScale; }
    double py(double y) const { return kMargin + (max_y - y) * kScale; }  // flip y
    double width() const { return 2 * kMargin + (max_x - min_x) * kScale; }
    double height() const { return 2 * kMargin + (max_y - min_y) * kScale; }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void polyline(std::ofstream& out, const Mapper& map, std::span<const Vec2> pts, const char* color,
              double width, double opacity) {
    out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
        << "\" stroke-opacity=\"" << opacity << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) out << " ";
        out << fmt(map.px(pts[i].x)) << "," << fmt(map.py(pts[i].y));
    }
    out << "\"/>\n";
}

}  // namespace

void write_rollout_svg(const std::string& path, const TrajectoryDataset& demos,
                       std::span<const RolloutRecord> rollouts, const EnvSpec& spec) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing", 0);

    Mapper map{spec.start.x, spec.start.y, spec.goal.x, spec.goal.y};
    const auto widen = [&map](const Vec2& p) {
        map.min_x = std::min(map.min_x, p.x);
        map.min_y = std::min(map.min_y, p.y);
        map.max_x = std::max(map.max_x, p.x);
        map.max_y = std::max(map.max_y, p.y);
    };
    std::vector<std::vector<Vec2>> demo_paths;
    for (const Trajectory& t : demos.trajectories) {
        demo_paths.push_back(trajectory_states(t, demos));
        for (const Vec2& p : demo_paths.back()) widen(p);
    }
    for (const RolloutRecord& r : rollouts) {
        for (const Vec2& p : r.states) widen(p);
    }

    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(map.width())
        << "\" height=\"" << fmt(map.height()) << "\" viewBox=\"0 0 " << fmt(map.width()) << " "
        << fmt(map.height()) << "\">\n";
    out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (const auto& states : demo_paths) {
        polyline(out, map, states, "#c8c8c8", 2.0, 0.8);
    }
    for (const RolloutRecord& r : rollouts) {
        polyline(out, map, r.states, mode_color(r.mode), 2.5, 0.35);
    }

    if (spec.id == EnvId::Multipath1) {
        // the blocked lattice point
        out << "  <g stroke=\"#000000\" stroke-width=\"2\">\n";
        out << "    <line x1=\"" << fmt(map.px(3) - 7) << "\" y1=\"" << fmt(map.py(2) - 7)
            << "\" x2=\"" << fmt(map.px(3) + 7) << "\" y2=\"" << fmt(map.py(2) + 7) << "\"/>\n";
        out << "    <line x1=\"" << fmt(map.px(3) - 7) << "\" y1=\"" << fmt(map.py(2) + 7)
            << "\" x2=\"" << fmt(map.px(3) + 7) << "\" y2=\"" << fmt(map.py(2) - 7) << "\"/>\n";
        out << "  </g>\n";
    }
    out << "  <circle cx=\"" << fmt(map.px(spec.start.x)) << "\" cy=\"" << fmt(map.py(spec.start.y))
        << "\" r=\"5\" fill=\"#000000\"/>\n";
    out << "  <circle cx=\"" << fmt(map.px(spec.goal.x)) << "\" cy=\"" << fmt(map.py(spec.goal.y))
        << "\" r=\"" << fmt(spec.goal_radius * Mapper::kScale)
        << "\" fill=\"#ffbf00\" fill-opacity=\"0.5\" stroke=\"#b8860b\"/>\n";
    out << "</svg>\n";
}

}  // namespace bet
