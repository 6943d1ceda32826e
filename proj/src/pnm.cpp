#include "dms/image.hpp"

#include "dms/error.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

namespace dms {

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("PNM: " + what + " at byte offset " + std::to_string(pos_));
    }

    // Skips whitespace and '#' comments between header tokens.
    void skip_separators() {
        while (pos_ < bytes_.size()) {
            const auto c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(c)) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long read_uint(const char* name) {
        skip_separators();
        if (pos_ >= bytes_.size()) fail(std::string("unexpected end of header reading ") + name);
        if (!std::isdigit(bytes_[pos_])) fail(std::string("expected digits for ") + name);
        long v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_] - '0');
            if (v > 1'000'000) fail(std::string(name) + " too large");
            ++pos_;
        }
        return v;
    }

    void expect_magic(int& channels) {
        if (bytes_.size() < 2 || bytes_[0] != 'P') fail("missing P5/P6 magic");
        if (bytes_[1] == '5') {
            channels = 1;
        } else if (bytes_[1] == '6') {
            channels = 3;
        } else {
            ++pos_;
            fail("unsupported PNM variant");
        }
        pos_ = 2;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    void expect_single_whitespace() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            fail("expected a single whitespace byte before the raster");
        }
        ++pos_;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

Image load_pnm(std::span<const std::uint8_t> bytes) {
    HeaderReader r(bytes);
    int channels = 0;
    r.expect_magic(channels);
    const long width = r.read_uint("width");
    const long height = r.read_uint("height");
    const std::size_t maxval_offset = r.offset();
    const long maxval = r.read_uint("maxval");
    if (width < 1 || height < 1) r.fail("zero image dimension");
    if (maxval != 255) {
        throw ParseError("PNM: maxval " + std::to_string(maxval) +
                         " is not 255 at byte offset " + std::to_string(maxval_offset));
    }
    r.expect_single_whitespace();
    const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                             static_cast<std::size_t>(channels);
    const std::size_t have = bytes.size() - r.offset();
    if (have < need) {
        throw ParseError("PNM: truncated raster at byte offset " + std::to_string(bytes.size()) +
                         ", expected " + std::to_string(need) + " payload bytes, found " +
                         std::to_string(have));
    }
    const auto payload = bytes.subspan(r.offset(), need);
    return Image(static_cast<int>(width), static_cast<int>(height), channels,
                 std::vector<std::uint8_t>(payload.begin(), payload.end()));
}

std::vector<std::uint8_t> save_pnm(const Image& img) {
    if (img.empty()) throw DimensionError("cannot encode an empty image");
    const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" +
                               std::to_string(img.width()) + " " + std::to_string(img.height()) +
                               "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.data().begin(), img.data().end());
    return out;
}

Image read_pnm_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return load_pnm(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_pnm_file(const std::string& path, const Image& img) {
    const auto bytes = save_pnm(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

} // namespace dms
