#include "dms/image.hpp"

#include "dms/error.hpp"

#include <algorithm>
#include <cmath>

namespace dms {

namespace {

std::vector<int> tile_edges(int extent, int tiles) {
    std::vector<int> edges(static_cast<std::size_t>(tiles) + 1);
    for (int i = 0; i <= tiles; ++i) {
        edges[static_cast<std::size_t>(i)] =
            static_cast<int>(static_cast<long long>(i) * extent / tiles);
    }
    return edges;
}

// Interpolation weights along one axis: the two neighbouring tile indices
// and the weight of the second. Outside the tile-centre grid both indices
// collapse onto the edge tile.
struct AxisTap {
    int t0 = 0;
    int t1 = 0;
    double w = 0.0;
};

std::vector<AxisTap> axis_taps(const std::vector<int>& edges, int extent) {
    const int tiles = static_cast<int>(edges.size()) - 1;
    std::vector<double> centres(static_cast<std::size_t>(tiles));
    for (int t = 0; t < tiles; ++t) {
        centres[static_cast<std::size_t>(t)] =
            (edges[static_cast<std::size_t>(t)] + edges[static_cast<std::size_t>(t) + 1] - 1) / 2.0;
    }
    std::vector<AxisTap> taps(static_cast<std::size_t>(extent));
    int t = 0;
    for (int p = 0; p < extent; ++p) {
        AxisTap& tap = taps[static_cast<std::size_t>(p)];
        if (p <= centres.front()) {
            tap = {0, 0, 0.0};
        } else if (p >= centres.back()) {
            tap = {tiles - 1, tiles - 1, 0.0};
        } else {
            while (centres[static_cast<std::size_t>(t) + 1] <= p) ++t;
            const double c0 = centres[static_cast<std::size_t>(t)];
            const double c1 = centres[static_cast<std::size_t>(t) + 1];
            tap = {t, t + 1, (p - c0) / (c1 - c0)};
        }
    }
    return taps;
}

void check_params(const Image& gray, const ClaheParams& params) {
    if (gray.channels() != 1) throw TypeError("CLAHE requires a single-channel image");
    if (params.tiles_x < 1 || params.tiles_y < 1) {
        throw InvalidArgument("CLAHE tile counts must be at least 1");
    }
    if (!(params.clip_limit >= 1.0)) throw InvalidArgument("CLAHE clip limit must be >= 1.0");
}

} // namespace

ClaheMappings clahe_mappings(const Image& gray, const ClaheParams& params) {
    check_params(gray, params);
    ClaheMappings m;
    m.tiles_x = std::min(params.tiles_x, gray.width());
    m.tiles_y = std::min(params.tiles_y, gray.height());
    m.tile_x0 = tile_edges(gray.width(), m.tiles_x);
    m.tile_y0 = tile_edges(gray.height(), m.tiles_y);
    m.tables.resize(static_cast<std::size_t>(m.tiles_x) * static_cast<std::size_t>(m.tiles_y));

    std::array<double, 256> hist{};
    for (int ty = 0; ty < m.tiles_y; ++ty) {
        for (int tx = 0; tx < m.tiles_x; ++tx) {
            hist.fill(0.0);
            const int x0 = m.tile_x0[static_cast<std::size_t>(tx)];
            const int x1 = m.tile_x0[static_cast<std::size_t>(tx) + 1];
            const int y0 = m.tile_y0[static_cast<std::size_t>(ty)];
            const int y1 = m.tile_y0[static_cast<std::size_t>(ty) + 1];
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) hist[gray.at(x, y)] += 1.0;
            }
            const double n = static_cast<double>(x1 - x0) * (y1 - y0);

            // Clip, then spread the clipped mass evenly over all bins once.
            const double limit = params.clip_limit * n / 256.0;
            double excess = 0.0;
            for (double& h : hist) {
                if (h > limit) {
                    excess += h - limit;
                    h = limit;
                }
            }
            const double share = excess / 256.0;

            auto& table = m.tables[static_cast<std::size_t>(ty * m.tiles_x + tx)];
            double cdf = 0.0;
            for (int v = 0; v < 256; ++v) {
                cdf += hist[static_cast<std::size_t>(v)] + share;
                const double mapped = std::floor(255.0 * cdf / n + 0.5);
                table[static_cast<std::size_t>(v)] =
                    static_cast<std::uint8_t>(std::clamp(mapped, 0.0, 255.0));
            }
        }
    }
    return m;
}

Image clahe(const Image& gray, const ClaheParams& params) {
    const ClaheMappings m = clahe_mappings(gray, params);
    const auto xt = axis_taps(m.tile_x0, gray.width());
    const auto yt = axis_taps(m.tile_y0, gray.height());

    Image out(gray.width(), gray.height(), 1);
    for (int y = 0; y < gray.height(); ++y) {
        const AxisTap& ty = yt[static_cast<std::size_t>(y)];
        for (int x = 0; x < gray.width(); ++x) {
            const AxisTap& tx = xt[static_cast<std::size_t>(x)];
            const std::uint8_t v = gray.at(x, y);
            const double a = m.table(tx.t0, ty.t0)[v];
            const double b = m.table(tx.t1, ty.t0)[v];
            const double c = m.table(tx.t0, ty.t1)[v];
            const double d = m.table(tx.t1, ty.t1)[v];
            const double top = (1.0 - tx.w) * a + tx.w * b;
            const double bot = (1.0 - tx.w) * c + tx.w * d;
            const double r = std::floor((1.0 - ty.w) * top + ty.w * bot + 0.5);
            out.at(x, y) = static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
        }
    }
    return out;
}

} // namespace dms
