#include "planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

#include "error.hpp"

namespace mpl {

GridMap::GridMap(double cell_size, int rows, int cols)
    : cell_size_(cell_size), rows_(rows), cols_(cols), occupancy_(static_cast<std::size_t>(rows) * cols, 0) {
    if (!(cell_size > 0.0) || rows <= 0 || cols <= 0)
        throw Error(ErrorCode::InvalidArgument, "grid dimensions must be positive");
}

Vec2 GridMap::cell_center(int row, int col) const {
    return {(col + 0.5) * cell_size_, (row + 0.5) * cell_size_};
}

std::pair<int, int> GridMap::cell_of(const Vec2 &p) const {
    int col = static_cast<int>(std::floor(p.x / cell_size_));
    int row = static_cast<int>(std::floor(p.y / cell_size_));
    return {std::clamp(row, 0, rows_ - 1), std::clamp(col, 0, cols_ - 1)};
}

std::size_t GridMap::blocked_count() const {
    return static_cast<std::size_t>(std::count(occupancy_.begin(), occupancy_.end(), std::uint8_t{1}));
}

GridMap build_grid(const Arena &arena, double inflation, double cell_size) {
    if (!(cell_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "cell_size must be positive");
    if (!(inflation >= 0.0)) throw Error(ErrorCode::InvalidArgument, "inflation must be non-negative");
    const int cols = static_cast<int>(std::ceil(arena.width / cell_size));
    const int rows = static_cast<int>(std::ceil(arena.depth / cell_size));
    GridMap grid(cell_size, rows, cols);
    for (const auto &o : arena.obstacles) {
        // Only cells whose centers fall in the inflated footprint's bounding box can be blocked.
        const Vec2 lo{o.center.x - o.half_extents.x - inflation, o.center.y - o.half_extents.y - inflation};
        const Vec2 hi{o.center.x + o.half_extents.x + inflation, o.center.y + o.half_extents.y + inflation};
        const auto [r0, c0] = grid.cell_of(lo);
        const auto [r1, c1] = grid.cell_of(hi);
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c)
                if (o.footprint_distance(grid.cell_center(r, c)) <= inflation) grid.set_blocked(r, c, true);
    }
    return grid;
}

double path_length(const std::vector<Vec2> &waypoints) {
    double total = 0.0;
    for (std::size_t k = 1; k < waypoints.size(); ++k) total += distance(waypoints[k - 1], waypoints[k]);
    return total;
}

Path plan(const GridMap &grid, const Vec2 &start, const Vec2 &goal) {
    const auto [sr, sc] = grid.cell_of(start);
    const auto [gr, gc] = grid.cell_of(goal);
    if (grid.blocked(sr, sc) || grid.blocked(gr, gc)) throw Error(ErrorCode::InvalidEndpoint, "invalid endpoint");

    const double cs = grid.cell_size();
    const double diag = std::sqrt(2.0) * cs;
    auto heuristic = [&](int r, int c) {
        const double dr = std::abs(r - gr);
        const double dc = std::abs(c - gc);
        return cs * (std::max(dr, dc) + (std::sqrt(2.0) - 1.0) * std::min(dr, dc));
    };

    const std::size_t n = static_cast<std::size_t>(grid.rows()) * grid.cols();
    auto id = [&](int r, int c) { return static_cast<std::size_t>(r) * grid.cols() + c; };
    std::vector<double> g(n, std::numeric_limits<double>::infinity());
    std::vector<std::int64_t> parent(n, -1);
    std::vector<std::uint8_t> closed(n, 0);

    // (f, h, row, col): lexicographic tie-break keeps expansion order deterministic.
    using Entry = std::tuple<double, double, int, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    g[id(sr, sc)] = 0.0;
    open.emplace(heuristic(sr, sc), heuristic(sr, sc), sr, sc);

    while (!open.empty()) {
        const auto [f, h, r, c] = open.top();
        open.pop();
        const std::size_t cur = id(r, c);
        if (closed[cur]) continue;
        closed[cur] = 1;
        if (r == gr && c == gc) break;
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                const int nr = r + dr;
                const int nc = c + dc;
                if (!grid.in_bounds(nr, nc) || grid.blocked(nr, nc)) continue;
                if (dr != 0 && dc != 0 && (grid.blocked(r + dr, c) || grid.blocked(r, c + dc))) continue;
                const std::size_t next = id(nr, nc);
                if (closed[next]) continue;
                const double candidate = g[cur] + ((dr != 0 && dc != 0) ? diag : cs);
                if (candidate < g[next]) {
                    g[next] = candidate;
                    parent[next] = static_cast<std::int64_t>(cur);
                    const double hn = heuristic(nr, nc);
                    open.emplace(candidate + hn, hn, nr, nc);
                }
            }
        }
    }

    const std::size_t goal_id = id(gr, gc);
    if (!closed[goal_id]) throw Error(ErrorCode::Unreachable, "unreachable");

    Path path;
    for (std::int64_t at = static_cast<std::int64_t>(goal_id); at >= 0; at = parent[static_cast<std::size_t>(at)]) {
        const int r = static_cast<int>(at / grid.cols());
        const int c = static_cast<int>(at % grid.cols());
        path.waypoints.push_back(grid.cell_center(r, c));
    }
    std::reverse(path.waypoints.begin(), path.waypoints.end());
    path.cost = path_length(path.waypoints);
    return path;
}

}  // namespace mpl
