#pragma once

#include <cstdint>
#include <vector>

#include "world.hpp"

namespace mpl {

/// Obstacle-inflated occupancy grid over the arena footprint. Cell (row, col)
/// covers [col*cell_size, (col+1)*cell_size) x [row*cell_size, (row+1)*cell_size).
class GridMap {
public:
    GridMap() = default;
    GridMap(double cell_size, int rows, int cols);

    double cell_size() const { return cell_size_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }

    bool in_bounds(int row, int col) const { return row >= 0 && row < rows_ && col >= 0 && col < cols_; }
    bool blocked(int row, int col) const { return occupancy_[index(row, col)] != 0; }
    void set_blocked(int row, int col, bool value) { occupancy_[index(row, col)] = value ? 1 : 0; }
    Vec2 cell_center(int row, int col) const;
    /// Cell containing p, clamped onto the grid.
    std::pair<int, int> cell_of(const Vec2 &p) const;
    std::size_t blocked_count() const;

private:
    std::size_t index(int row, int col) const { return static_cast<std::size_t>(row) * cols_ + col; }

    double cell_size_ = 1.0;
    int rows_ = 0;
    int cols_ = 0;
    std::vector<std::uint8_t> occupancy_;
};

struct Path {
    std::vector<Vec2> waypoints;
    double cost = 0.0;
};

/// A cell is blocked iff its center lies within `inflation` of an obstacle footprint.
GridMap build_grid(const Arena &arena, double inflation, double cell_size);

/// Minimal-cost 8-connected A* (diagonal cost sqrt(2)*cell_size, no corner
/// cutting past blocked cells). Throws Error(InvalidEndpoint) or Error(Unreachable).
Path plan(const GridMap &grid, const Vec2 &start, const Vec2 &goal);

double path_length(const std::vector<Vec2> &waypoints);

}  // namespace mpl
