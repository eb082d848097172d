#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fracstep {

/// Uniform periodic grid with M points per direction on [0, L)^2.
/// The duplicated boundary row/column is excluded, so every point carries
/// the same quadrature weight h^2.
class Grid2D {
public:
    Grid2D(int M, double L);

    int M() const { return M_; }
    double L() const { return L_; }
    double h() const { return h_; }
    std::size_t size() const { return static_cast<std::size_t>(M_) * static_cast<std::size_t>(M_); }
    double x(int i) const { return i * h_; }

    bool operator==(const Grid2D& other) const { return M_ == other.M_ && L_ == other.L_; }

private:
    int M_;
    double L_;
    double h_;
};

/// Grid function, row-major (i is the row / x index, j the column / y index).
class PhaseField {
public:
    PhaseField() = default;
    explicit PhaseField(const Grid2D& grid, double value = 0.0)
        : M_(grid.M()), values_(grid.size(), value) {}

    int M() const { return M_; }
    std::size_t size() const { return values_.size(); }

    double& operator()(int i, int j) { return values_[index(i, j)]; }
    double operator()(int i, int j) const { return values_[index(i, j)]; }
    double& operator[](std::size_t p) { return values_[p]; }
    double operator[](std::size_t p) const { return values_[p]; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(M_) + static_cast<std::size_t>(j);
    }

    int M_ = 0;
    std::vector<double> values_;
};

/// Samples f(x, y) at the grid points.
template <class F>
PhaseField sample(const Grid2D& grid, F&& f) {
    PhaseField u(grid);
    for (int i = 0; i < grid.M(); ++i)
        for (int j = 0; j < grid.M(); ++j) u(i, j) = f(grid.x(i), grid.x(j));
    return u;
}

/// Five-point periodic Laplacian.
PhaseField laplacian(const PhaseField& u, const Grid2D& grid);
/// out = laplacian(u); out must already be sized for the grid.
void apply_laplacian(const PhaseField& u, const Grid2D& grid, PhaseField& out);

/// Discrete symbol of the periodic five-point Laplacian for the plane wave
/// with integer wavenumbers (kx, ky) on [0, L)^2.
double laplacian_symbol(const Grid2D& grid, int kx, int ky);

/// h^2 sum u v.
double inner(const PhaseField& u, const PhaseField& v, const Grid2D& grid);
double norm_l2(const PhaseField& u, const Grid2D& grid);
double norm_inf(const PhaseField& u);
/// Discrete ||grad u||^2 from periodic forward differences.
double grad_energy(const PhaseField& u, const Grid2D& grid);

/// Flat binary: int64 M, float64 L, then M*M row-major float64 values.
void write_binary(std::ostream& out, const PhaseField& u, const Grid2D& grid);
PhaseField read_binary(std::istream& in, Grid2D* grid_out = nullptr);

/// 8-bit binary PGM (P5), values clamped to [-1, 1] and mapped to [0, 255].
void write_pgm(std::ostream& out, const PhaseField& u);

}  // namespace fracstep
