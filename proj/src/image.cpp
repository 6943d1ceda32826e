#include "dms/image.hpp"

#include "dms/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dms {

namespace {

void check_shape(int width, int height, int channels) {
    if (width < 1 || height < 1) {
        throw DimensionError("image dimensions must be positive, got " + std::to_string(width) +
                             "x" + std::to_string(height));
    }
    if (channels != 1 && channels != 3) {
        throw DimensionError("image channel count must be 1 or 3, got " +
                             std::to_string(channels));
    }
}

std::uint8_t round_to_u8(double v) {
    const double r = std::floor(v + 0.5);
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

// Source taps for one output coordinate of an area resize.
struct AreaTap {
    int src = 0;
    double weight = 0.0;
};

std::vector<std::vector<AreaTap>> area_taps(int in, int out) {
    std::vector<std::vector<AreaTap>> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        const double lo = o * scale;
        const double hi = (o + 1) * scale;
        const int first = static_cast<int>(std::floor(lo));
        const int last = std::min(in - 1, static_cast<int>(std::ceil(hi)) - 1);
        for (int s = first; s <= last; ++s) {
            const double w = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
            if (w > 0.0) taps[static_cast<std::size_t>(o)].push_back({s, w});
        }
    }
    return taps;
}

} // namespace

Image::Image(int width, int height, int channels)
    : width_(width), height_(height), channels_(channels) {
    check_shape(width, height, channels);
    data_.assign(pixel_count() * static_cast<std::size_t>(channels), 0);
}

Image::Image(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    check_shape(width, height, channels);
    if (data_.size() != pixel_count() * static_cast<std::size_t>(channels)) {
        throw DimensionError("image data holds " + std::to_string(data_.size()) +
                             " samples, expected " +
                             std::to_string(pixel_count() * static_cast<std::size_t>(channels)));
    }
}

BoundingBox clamp_box(const BoundingBox& box, int width, int height) noexcept {
    const long long x0 = std::max<long long>(box.x, 0);
    const long long y0 = std::max<long long>(box.y, 0);
    const long long x1 = std::min<long long>(static_cast<long long>(box.x) + box.w, width);
    const long long y1 = std::min<long long>(static_cast<long long>(box.y) + box.h, height);
    BoundingBox out;
    out.x = static_cast<int>(std::min<long long>(x0, width));
    out.y = static_cast<int>(std::min<long long>(y0, height));
    out.w = static_cast<int>(std::max<long long>(0, x1 - x0));
    out.h = static_cast<int>(std::max<long long>(0, y1 - y0));
    return out;
}

Image to_grayscale(const Image& img) {
    if (img.channels() == 1) return img;
    Image out(img.width(), img.height(), 1);
    auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const unsigned r = src[3 * i];
        const unsigned g = src[3 * i + 1];
        const unsigned b = src[3 * i + 2];
        // Integer weights keep the half-up rounding exact.
        dst[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
    }
    return out;
}

Image resize(const Image& img, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) {
        throw DimensionError("resize target must be positive, got " + std::to_string(out_w) +
                             "x" + std::to_string(out_h));
    }
    const int ch = img.channels();
    Image out(out_w, out_h, ch);
    const double sx = static_cast<double>(img.width()) / out_w;
    const double sy = static_cast<double>(img.height()) / out_h;

    struct Tap {
        int i0, i1;
        double f;
    };
    auto make_taps = [](int out_n, int in_n, double scale) {
        std::vector<Tap> taps(static_cast<std::size_t>(out_n));
        for (int d = 0; d < out_n; ++d) {
            double s = (d + 0.5) * scale - 0.5;
            s = std::clamp(s, 0.0, static_cast<double>(in_n - 1));
            const int i0 = static_cast<int>(std::floor(s));
            const int i1 = std::min(i0 + 1, in_n - 1);
            taps[static_cast<std::size_t>(d)] = {i0, i1, s - i0};
        }
        return taps;
    };
    const auto xt = make_taps(out_w, img.width(), sx);
    const auto yt = make_taps(out_h, img.height(), sy);

    for (int y = 0; y < out_h; ++y) {
        const Tap& ty = yt[static_cast<std::size_t>(y)];
        for (int x = 0; x < out_w; ++x) {
            const Tap& tx = xt[static_cast<std::size_t>(x)];
            for (int c = 0; c < ch; ++c) {
                const double top = (1.0 - tx.f) * img.at(tx.i0, ty.i0, c) + tx.f * img.at(tx.i1, ty.i0, c);
                const double bot = (1.0 - tx.f) * img.at(tx.i0, ty.i1, c) + tx.f * img.at(tx.i1, ty.i1, c);
                out.at(x, y, c) = round_to_u8((1.0 - ty.f) * top + ty.f * bot);
            }
        }
    }
    return out;
}

Image resize_area(const Image& img, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) {
        throw DimensionError("resize target must be positive, got " + std::to_string(out_w) +
                             "x" + std::to_string(out_h));
    }
    const int ch = img.channels();
    const auto xt = area_taps(img.width(), out_w);
    const auto yt = area_taps(img.height(), out_h);
    Image out(out_w, out_h, ch);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double sum = 0.0;
                double norm = 0.0;
                for (const AreaTap& ty : yt[static_cast<std::size_t>(y)]) {
                    for (const AreaTap& tx : xt[static_cast<std::size_t>(x)]) {
                        const double w = ty.weight * tx.weight;
                        sum += w * img.at(tx.src, ty.src, c);
                        norm += w;
                    }
                }
                out.at(x, y, c) = round_to_u8(sum / norm);
            }
        }
    }
    return out;
}

Image center_crop(const Image& img, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1 || out_w > img.width() || out_h > img.height()) {
        throw DimensionError("center crop " + std::to_string(out_w) + "x" +
                             std::to_string(out_h) + " does not fit in " +
                             std::to_string(img.width()) + "x" + std::to_string(img.height()));
    }
    return crop(img, {(img.width() - out_w) / 2, (img.height() - out_h) / 2, out_w, out_h});
}

Image crop(const Image& img, const BoundingBox& box) {
    const BoundingBox c = clamp_box(box, img.width(), img.height());
    if (c.w <= 0 || c.h <= 0) {
        throw DimensionError("crop box (" + std::to_string(box.x) + "," + std::to_string(box.y) +
                             "," + std::to_string(box.w) + "," + std::to_string(box.h) +
                             ") does not intersect the image");
    }
    const int ch = img.channels();
    Image out(c.w, c.h, ch);
    const std::size_t row_bytes = static_cast<std::size_t>(c.w) * static_cast<std::size_t>(ch);
    for (int y = 0; y < c.h; ++y) {
        const auto src = img.data().subspan(
            (static_cast<std::size_t>(c.y + y) * static_cast<std::size_t>(img.width()) +
             static_cast<std::size_t>(c.x)) * static_cast<std::size_t>(ch),
            row_bytes);
        std::copy(src.begin(), src.end(),
                  out.data().begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(y) * row_bytes));
    }
    return out;
}

BoundingBox expand_box(const BoundingBox& box, double factor, int bounds_w, int bounds_h) {
    if (factor < 0.0) {
        throw InvalidArgument("expand factor must be non-negative");
    }
    // Edges are rounded independently: the leading edge rounds ties down,
    // the trailing edge rounds ties up, so ties always move away from centre.
    auto span = [factor](int origin, int extent) {
        const double centre = origin + extent / 2.0;
        const double half = extent * (1.0 + factor) / 2.0;
        const double lo = std::ceil(centre - half - 0.5);
        const double hi = std::floor(centre + half + 0.5);
        return std::pair<long long, long long>{static_cast<long long>(lo),
                                               static_cast<long long>(hi)};
    };
    const auto [x0, x1] = span(box.x, box.w);
    const auto [y0, y1] = span(box.y, box.h);
    const long long cx0 = std::clamp<long long>(x0, 0, bounds_w);
    const long long cx1 = std::clamp<long long>(x1, 0, bounds_w);
    const long long cy0 = std::clamp<long long>(y0, 0, bounds_h);
    const long long cy1 = std::clamp<long long>(y1, 0, bounds_h);
    if (cx1 <= cx0 || cy1 <= cy0) {
        throw DimensionError("expanded box lies outside the " + std::to_string(bounds_w) + "x" +
                             std::to_string(bounds_h) + " bounds");
    }
    return {static_cast<int>(cx0), static_cast<int>(cy0), static_cast<int>(cx1 - cx0),
            static_cast<int>(cy1 - cy0)};
}

double mean_brightness(const Image& img) {
    if (img.empty()) return 0.0;
    const Image gray = to_grayscale(img);
    std::uint64_t sum = 0;
    for (std::uint8_t v : gray.data()) sum += v;
    return static_cast<double>(sum) / static_cast<double>(gray.pixel_count());
}

DHash dhash(const Image& img) {
    const Image small = resize_area(to_grayscale(img), 9, 8);
    DHash h;
    for (int row = 0; row < 8; ++row) {
        for (int col = 0; col < 8; ++col) {
            if (small.at(col, row) > small.at(col + 1, row)) {
                h.bits |= std::uint64_t{1} << (row * 8 + col);
            }
        }
    }
    return h;
}

} // namespace dms
