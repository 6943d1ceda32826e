#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dms {

/// Owned 8-bit raster, row-major, interleaved channels. IR frames are
/// single-channel, RGB frames three-channel.
class Image {
public:
    Image() = default;

    /// Zero-filled image. Throws DimensionError for non-positive sizes or
    /// a channel count other than 1 or 3.
    Image(int width, int height, int channels);

    /// Takes ownership of `data`, which must hold exactly width*height*channels samples.
    Image(int width, int height, int channels, std::vector<std::uint8_t> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }

    std::uint8_t at(int x, int y, int c = 0) const noexcept {
        return data_[index(x, y, c)];
    }
    std::uint8_t& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }

    std::span<const std::uint8_t> data() const noexcept { return data_; }
    std::span<std::uint8_t> data() noexcept { return data_; }

    bool operator==(const Image&) const = default;

private:
    std::size_t index(int x, int y, int c) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x)) * static_cast<std::size_t>(channels_) +
               static_cast<std::size_t>(c);
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Axis-aligned pixel box; x/y may be negative before clamping.
struct BoundingBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    long long area() const noexcept { return static_cast<long long>(w) * h; }
    bool operator==(const BoundingBox&) const = default;
};

/// Intersection of `box` with [0,width)x[0,height). May have zero area.
BoundingBox clamp_box(const BoundingBox& box, int width, int height) noexcept;

/// 64-bit difference hash; bit (row*8 + col) is set when the downscaled
/// pixel at (row, col) is brighter than its right neighbour.
struct DHash {
    std::uint64_t bits = 0;
    bool operator==(const DHash&) const = default;
    auto operator<=>(const DHash&) const = default;
};

// --- PNM interchange (binary P5/P6, maxval 255) ---

Image load_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> save_pnm(const Image& img);
Image read_pnm_file(const std::string& path);
void write_pnm_file(const std::string& path, const Image& img);

// --- pixel operations ---

/// BT.601 luma, rounded half up. Grayscale input is returned unchanged.
Image to_grayscale(const Image& img);

/// Bilinear resize with half-pixel centres; source coordinates are clamped
/// to the valid range so edges replicate.
Image resize(const Image& img, int out_w, int out_h);

/// Box-filter (area) resize. Each output pixel is the coverage-weighted mean
/// of the source pixels under it, rounded to nearest.
Image resize_area(const Image& img, int out_w, int out_h);

/// Crop of the given size anchored at floor((W-w)/2), floor((H-h)/2).
Image center_crop(const Image& img, int out_w, int out_h);

/// Copies the part of `box` that lies inside the image. Throws
/// DimensionError when the intersection is empty.
Image crop(const Image& img, const BoundingBox& box);

/// Scales the box about its centre by (1 + factor), rounds edges to whole
/// pixels (ties away from the centre) and clamps to the bounds.
BoundingBox expand_box(const BoundingBox& box, double factor, int bounds_w, int bounds_h);

/// Mean sample value of the grayscale conversion.
double mean_brightness(const Image& img);

DHash dhash(const Image& img);

// --- CLAHE ---

struct ClaheParams {
    int tiles_x = 8;
    int tiles_y = 8;
    double clip_limit = 2.0;
};

/// Per-tile grey-level transfer tables computed by CLAHE. Tiles are laid
/// out row-major; `tile_x0`/`tile_y0` hold the first pixel of each tile
/// column/row plus a trailing end marker.
struct ClaheMappings {
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<int> tile_x0;
    std::vector<int> tile_y0;
    std::vector<std::array<std::uint8_t, 256>> tables;

    const std::array<std::uint8_t, 256>& table(int tx, int ty) const {
        return tables[static_cast<std::size_t>(ty * tiles_x + tx)];
    }
};

/// Builds the per-tile tables only. Tile counts larger than the image
/// dimension are reduced to one tile per pixel along that axis.
ClaheMappings clahe_mappings(const Image& gray, const ClaheParams& params);

/// Contrast-limited adaptive histogram equalization of a grayscale image.
/// Throws TypeError for multi-channel input.
Image clahe(const Image& gray, const ClaheParams& params = {});

} // namespace dms
