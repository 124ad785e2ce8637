#include "flowgen/flow/io.hpp"

#include "flowgen/error.hpp"

#include <png.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>
#include <vector>

namespace flowgen::io {

namespace {

constexpr float kFloMagic = 202021.25f;
constexpr char kNpyMagic[] = "\x93NUMPY";

template <typename T>
T byteswap_if_big(T value) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return value;
}

template <typename T>
void put_le(std::string& out, T value) {
    value = byteswap_if_big(value);
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    out.append(raw, sizeof(T));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
    T value;
    std::memcpy(&value, bytes.data() + offset, sizeof(T));
    return byteswap_if_big(value);
}

struct NpyHeader {
    char kind = 'f';
    int item_size = 4;
    std::vector<long long> shape;
    std::size_t data_offset = 0;
};

std::string npy_header(const std::vector<long long>& shape, const char* descr = "<f4") {
    std::ostringstream dict;
    dict << "{'descr': '" << descr << "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        dict << shape[i];
        if (shape.size() == 1 || i + 1 < shape.size()) dict << ",";
        if (i + 1 < shape.size()) dict << " ";
    }
    dict << "), }";
    std::string header = dict.str();
    const std::size_t prefix = 6 + 2 + 2;
    const std::size_t total = prefix + header.size() + 1;
    header.append((64 - total % 64) % 64, ' ');
    header.push_back('\n');

    std::string out(kNpyMagic, 6);
    out.push_back('\x01');
    out.push_back('\x00');
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(header.size()));
    out += header;
    return out;
}

NpyHeader parse_npy_header(std::string_view bytes) {
    if (bytes.size() < 10 || bytes.substr(0, 6) != std::string_view(kNpyMagic, 6)) {
        throw ValidationError("npy: missing magic string");
    }
    const int major = static_cast<unsigned char>(bytes[6]);
    std::size_t header_len = 0;
    std::size_t prefix = 0;
    if (major == 1) {
        header_len = get_le<std::uint16_t>(bytes, 8);
        prefix = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) throw ValidationError("npy: truncated header");
        header_len = get_le<std::uint32_t>(bytes, 8);
        prefix = 12;
    } else {
        throw ValidationError("npy: unsupported format version " + std::to_string(major));
    }
    if (bytes.size() < prefix + header_len) throw ValidationError("npy: truncated header");
    const std::string dict(bytes.substr(prefix, header_len));

    NpyHeader header;
    header.data_offset = prefix + header_len;

    static const std::regex descr_re(R"('descr'\s*:\s*'([<>|=])([fub])(\d+)')");
    static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
    static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
    std::smatch m;
    if (!std::regex_search(dict, m, descr_re)) throw ValidationError("npy: missing descr");
    if (m[1] == ">") throw ValidationError("npy: big-endian arrays are not supported");
    header.kind = m[2].str()[0];
    header.item_size = std::stoi(m[3]);
    const bool ok_type = (header.kind == 'f' && (header.item_size == 4 || header.item_size == 8)) ||
                         ((header.kind == 'u' || header.kind == 'b') && header.item_size == 1);
    if (!ok_type) throw ValidationError("npy: unsupported dtype in header '" + dict + "'");
    if (!std::regex_search(dict, m, order_re)) throw ValidationError("npy: missing fortran_order");
    if (m[1] == "True") throw ValidationError("npy: Fortran-ordered arrays are not supported");
    if (!std::regex_search(dict, m, shape_re)) throw ValidationError("npy: missing shape");
    std::stringstream dims(m[1].str());
    std::string item;
    while (std::getline(dims, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
        if (!item.empty()) header.shape.push_back(std::stoll(item));
    }
    long long count = 1;
    for (long long d : header.shape) {
        if (d <= 0) throw ValidationError("npy: zero-sized arrays are not supported");
        count *= d;
    }
    if (bytes.size() - header.data_offset != static_cast<std::size_t>(count) * header.item_size) {
        throw ValidationError("npy: payload size does not match shape");
    }
    return header;
}

std::vector<double> npy_values(std::string_view bytes, const NpyHeader& header) {
    const std::size_t count = (bytes.size() - header.data_offset) / header.item_size;
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t at = header.data_offset + i * header.item_size;
        if (header.kind == 'f' && header.item_size == 4) {
            values[i] = static_cast<double>(get_le<float>(bytes, at));
        } else if (header.kind == 'f') {
            values[i] = get_le<double>(bytes, at);
        } else {
            values[i] = static_cast<unsigned char>(bytes[at]);
        }
    }
    return values;
}

void append_f32(std::string& out, std::span<const double> values) {
    out.reserve(out.size() + values.size() * 4);
    for (double v : values) put_le<float>(out, static_cast<float>(v));
}

} // namespace

std::string encode_flo(const FlowField& flow) {
    std::string out;
    out.reserve(12 + flow.pixel_count() * 8);
    put_le<float>(out, kFloMagic);
    put_le<std::int32_t>(out, flow.width());
    put_le<std::int32_t>(out, flow.height());
    const auto u = flow.u_data();
    const auto v = flow.v_data();
    for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
        put_le<float>(out, static_cast<float>(u[i]));
        put_le<float>(out, static_cast<float>(v[i]));
    }
    return out;
}

FlowField decode_flo(std::string_view bytes, FlowConvention convention) {
    if (bytes.size() < 12) throw ValidationError("flo: file too short for header");
    if (get_le<float>(bytes, 0) != kFloMagic) throw ValidationError("flo: bad magic number");
    const auto width = get_le<std::int32_t>(bytes, 4);
    const auto height = get_le<std::int32_t>(bytes, 8);
    if (width <= 0 || height <= 0 || width > (1 << 16) || height > (1 << 16)) {
        throw ValidationError("flo: implausible dimensions " + std::to_string(width) + "x" +
                              std::to_string(height));
    }
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (bytes.size() != 12 + n * 8) throw ValidationError("flo: payload size does not match header");
    std::vector<double> u(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = get_le<float>(bytes, 12 + i * 8);
        v[i] = get_le<float>(bytes, 16 + i * 8);
    }
    return FlowField(width, height, convention, std::move(u), std::move(v));
}

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
    write_file_atomic(path, encode_flo(flow));
}

FlowField read_flo(const std::filesystem::path& path, FlowConvention convention) {
    return decode_flo(read_file(path), convention);
}

std::string encode_npy(const TensorGrid& grid) {
    std::string out = npy_header({grid.height(), grid.width(), grid.channels()});
    append_f32(out, grid.data());
    return out;
}

std::string encode_npy_f64(const TensorGrid& grid) {
    std::string out = npy_header({grid.height(), grid.width(), grid.channels()}, "<f8");
    out.reserve(out.size() + grid.size() * 8);
    for (double v : grid.data()) put_le<double>(out, v);
    return out;
}

std::string encode_npy(const EtaMap& eta) {
    std::string out = npy_header({eta.height(), eta.width()});
    append_f32(out, eta.values());
    return out;
}

TensorGrid decode_npy_grid(std::string_view bytes) {
    const NpyHeader header = parse_npy_header(bytes);
    if (header.shape.size() != 2 && header.shape.size() != 3) {
        throw ValidationError("npy: grid arrays must be 2-D or 3-D");
    }
    const int channels = header.shape.size() == 3 ? static_cast<int>(header.shape[2]) : 1;
    return TensorGrid(static_cast<int>(header.shape[1]), static_cast<int>(header.shape[0]), channels,
                      npy_values(bytes, header));
}

EtaMap decode_npy_eta(std::string_view bytes) {
    const NpyHeader header = parse_npy_header(bytes);
    if (header.shape.size() != 2) throw ValidationError("npy: eta maps must be 2-D");
    return EtaMap(static_cast<int>(header.shape[1]), static_cast<int>(header.shape[0]),
                  npy_values(bytes, header));
}

void write_npy(const std::filesystem::path& path, const TensorGrid& grid) {
    write_file_atomic(path, encode_npy(grid));
}

void write_npy(const std::filesystem::path& path, const EtaMap& eta) {
    write_file_atomic(path, encode_npy(eta));
}

TensorGrid read_npy_grid(const std::filesystem::path& path) { return decode_npy_grid(read_file(path)); }

EtaMap read_npy_eta(const std::filesystem::path& path) { return decode_npy_eta(read_file(path)); }

TensorGrid read_png(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    const std::string bytes = read_file(path);
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw ValidationError("png: cannot decode " + path.string() + ": " + image.message);
    }
    const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
    image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string message = image.message;
        png_image_free(&image);
        throw ValidationError("png: cannot decode " + path.string() + ": " + message);
    }
    const int channels = gray ? 1 : 3;
    std::vector<double> data(buffer.size());
    std::transform(buffer.begin(), buffer.end(), data.begin(), [](png_byte b) { return b / 255.0; });
    return TensorGrid(static_cast<int>(image.width), static_cast<int>(image.height), channels,
                      std::move(data));
}

void write_png(const std::filesystem::path& path, const TensorGrid& image_grid) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(image_grid.width());
    image.height = static_cast<png_uint_32>(image_grid.height());
    switch (image_grid.channels()) {
    case 1: image.format = PNG_FORMAT_GRAY; break;
    case 3: image.format = PNG_FORMAT_RGB; break;
    case 4: image.format = PNG_FORMAT_RGBA; break;
    default:
        throw ValidationError("png: cannot store " + std::to_string(image_grid.channels()) +
                              " channels (need 1, 3 or 4)");
    }
    std::vector<png_byte> buffer(image_grid.size());
    const auto data = image_grid.data();
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        buffer[i] = static_cast<png_byte>(std::lround(std::clamp(data[i], 0.0, 1.0) * 255.0));
    }
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(image, size, 0, buffer.data(), 0, nullptr)) {
        throw RuntimeError("png: cannot size encoding for " + path.string() + ": " + image.message);
    }
    std::string encoded(size, '\0');
    if (!png_image_write_to_memory(&image, encoded.data(), &size, 0, buffer.data(), 0, nullptr)) {
        throw RuntimeError("png: cannot encode " + path.string() + ": " + image.message);
    }
    encoded.resize(size);
    write_file_atomic(path, encoded);
}

Mask read_mask(const std::filesystem::path& path) {
    const TensorGrid grid = path.extension() == ".png" ? read_png(path) : read_npy_grid(path);
    Mask mask(grid.width(), grid.height());
    for (int y = 0; y < grid.height(); ++y) {
        for (int x = 0; x < grid.width(); ++x) {
            for (int c = 0; c < grid.channels(); ++c) {
                if (grid.at(x, y, c) != 0.0) mask.set(x, y, true);
            }
        }
    }
    return mask;
}

std::string read_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ValidationError("no such file: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw RuntimeError("error while reading " + path.string());
    return std::move(buffer).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp-" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeError("cannot create " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw RuntimeError("error while writing " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw RuntimeError("cannot move " + tmp.string() + " into place: " + ec.message());
    }
}

} // namespace flowgen::io
