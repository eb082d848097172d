#include "fracstep/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "fracstep/special.hpp"

namespace fracstep {

Grid2D::Grid2D(int M, double L) : M_(M), L_(L), h_(L / M) {
    if (M < 4) throw std::invalid_argument("grid needs M >= 4");
    if (!(std::isfinite(L) && L > 0.0)) throw std::invalid_argument("grid edge length must be positive");
}

namespace {

void require_grid(const PhaseField& u, const Grid2D& grid) {
    if (u.M() != grid.M()) throw std::invalid_argument("field does not match grid");
}

}  // namespace

void apply_laplacian(const PhaseField& u, const Grid2D& grid, PhaseField& out) {
    require_grid(u, grid);
    require_grid(out, grid);
    const int M = grid.M();
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    const double* src = u.values().data();
    double* dst = out.values().data();
    for (int i = 0; i < M; ++i) {
        const double* row = src + static_cast<std::ptrdiff_t>(i) * M;
        const double* up = src + static_cast<std::ptrdiff_t>((i + M - 1) % M) * M;
        const double* down = src + static_cast<std::ptrdiff_t>((i + 1) % M) * M;
        double* o = dst + static_cast<std::ptrdiff_t>(i) * M;
        o[0] = (up[0] + down[0] + row[M - 1] + row[1] - 4.0 * row[0]) * inv_h2;
        for (int j = 1; j < M - 1; ++j) {
            o[j] = (up[j] + down[j] + row[j - 1] + row[j + 1] - 4.0 * row[j]) * inv_h2;
        }
        o[M - 1] = (up[M - 1] + down[M - 1] + row[M - 2] + row[0] - 4.0 * row[M - 1]) * inv_h2;
    }
}

PhaseField laplacian(const PhaseField& u, const Grid2D& grid) {
    PhaseField out(grid);
    apply_laplacian(u, grid, out);
    return out;
}

double laplacian_symbol(const Grid2D& grid, int kx, int ky) {
    const double h = grid.h();
    const double wx = 2.0 * std::numbers::pi * kx / grid.L();
    const double wy = 2.0 * std::numbers::pi * ky / grid.L();
    return -(2.0 - 2.0 * std::cos(wx * h) + 2.0 - 2.0 * std::cos(wy * h)) / (h * h);
}

double inner(const PhaseField& u, const PhaseField& v, const Grid2D& grid) {
    require_grid(u, grid);
    require_grid(v, grid);
    CompensatedSum s;
    for (std::size_t p = 0; p < u.size(); ++p) s.add(u[p] * v[p]);
    return grid.h() * grid.h() * s.value();
}

double norm_l2(const PhaseField& u, const Grid2D& grid) { return std::sqrt(inner(u, u, grid)); }

double norm_inf(const PhaseField& u) {
    double m = 0.0;
    for (double x : u.values()) m = std::max(m, std::abs(x));
    return m;
}

double grad_energy(const PhaseField& u, const Grid2D& grid) {
    require_grid(u, grid);
    const int M = grid.M();
    CompensatedSum s;
    for (int i = 0; i < M; ++i) {
        const int ip = (i + 1) % M;
        for (int j = 0; j < M; ++j) {
            const int jp = (j + 1) % M;
            const double dx = u(ip, j) - u(i, j);
            const double dy = u(i, jp) - u(i, j);
            s.add(dx * dx + dy * dy);
        }
    }
    // h^2 * sum (diff/h)^2
    return s.value();
}

void write_binary(std::ostream& out, const PhaseField& u, const Grid2D& grid) {
    require_grid(u, grid);
    const std::int64_t M = grid.M();
    const double L = grid.L();
    out.write(reinterpret_cast<const char*>(&M), sizeof M);
    out.write(reinterpret_cast<const char*>(&L), sizeof L);
    out.write(reinterpret_cast<const char*>(u.values().data()),
              static_cast<std::streamsize>(u.size() * sizeof(double)));
}

PhaseField read_binary(std::istream& in, Grid2D* grid_out) {
    std::int64_t M = 0;
    double L = 0.0;
    in.read(reinterpret_cast<char*>(&M), sizeof M);
    in.read(reinterpret_cast<char*>(&L), sizeof L);
    if (!in || M < 4 || M > (1 << 16)) throw std::runtime_error("bad field header");
    const Grid2D grid(static_cast<int>(M), L);
    PhaseField u(grid);
    in.read(reinterpret_cast<char*>(u.values().data()), static_cast<std::streamsize>(u.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated field data");
    if (grid_out) *grid_out = grid;
    return u;
}

void write_pgm(std::ostream& out, const PhaseField& u) {
    const int M = u.M();
    out << "P5\n" << M << ' ' << M << "\n255\n";
    std::vector<unsigned char> bytes(u.size());
    for (std::size_t p = 0; p < u.size(); ++p) {
        const double v = std::clamp(u[p], -1.0, 1.0);
        bytes[p] = static_cast<unsigned char>(std::lround((v + 1.0) * 127.5));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace fracstep
