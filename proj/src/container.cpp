#include "aqc/container.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "aqc/errors.hpp"

namespace aqc::io {

static_assert(std::endian::native == std::endian::little, "container encoding assumes little-endian");

namespace {

constexpr char kMagic[8] = {'A', 'Q', 'C', 'B', 'I', 'N', '\0', '\1'};

template <typename T>
void put(std::vector<unsigned char>& out, T v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
public:
    Reader(const std::vector<unsigned char>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    const unsigned char* take(std::size_t n, const char* what) {
        need(n, what);
        const unsigned char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::size_t remaining() const { return end_ - pos_; }

private:
    void need(std::size_t n, const char* what) {
        if (n > end_ - pos_) throw FormatError(std::string("container truncated while reading ") + what);
    }
    const std::vector<unsigned char>& bytes_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a(const unsigned char* data, std::size_t size) {
    std::uint64_t h = 14695981039346656037ull;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

const Tensor& Container::array(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return a.value;
    throw FormatError("container has no array named '" + name + "'");
}

bool Container::has(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return true;
    return false;
}

void write_container(const std::string& path, const Container& c) {
    nlohmann::json header;
    header["kind"] = c.kind;
    header["meta"] = c.meta;
    header["arrays"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& a : c.arrays) {
        header["arrays"].push_back(
            {{"name", a.name}, {"shape", a.value.shape()}, {"offset", offset}, {"count", a.value.size()}});
        offset += a.value.size();
    }
    const std::string text = header.dump();

    std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
    put(out, kContainerVersion);
    put(out, static_cast<std::uint64_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    put(out, offset);
    for (const auto& a : c.arrays)
        for (double v : a.value.values()) put(out, v);
    put(out, fnv1a(out.data(), out.size()));

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + tmp + " for writing");
        f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
        if (!f) throw IoError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

Container read_container(const std::string& path, const std::string& expected_kind) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t)) throw FormatError(path + ": file too short");

    const std::size_t body = bytes.size() - sizeof(std::uint64_t);
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + body, sizeof stored);
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError(path + ": not an aqc container");
    if (fnv1a(bytes.data(), body) != stored) throw FormatError(path + ": checksum mismatch (file corrupted)");

    Reader r(bytes, body);
    r.take(sizeof(kMagic), "magic");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kContainerVersion) {
        throw FormatError(path + ": unsupported container version " + std::to_string(version));
    }
    const auto header_len = r.get<std::uint64_t>("header length");
    const unsigned char* text = r.take(header_len, "header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text, text + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": malformed header: " + e.what());
    }
    const auto count = r.get<std::uint64_t>("value count");
    if (count > r.remaining() / sizeof(double) || r.remaining() != count * sizeof(double)) {
        throw FormatError(path + ": payload size does not match header");
    }
    const unsigned char* payload = r.take(count * sizeof(double), "payload");

    Container c;
    try {
        c.kind = header.at("kind").get<std::string>();
        c.meta = header.at("meta");
        for (const auto& entry : header.at("arrays")) {
            const auto shape = entry.at("shape").get<num::Shape>();
            const auto offset = entry.at("offset").get<std::uint64_t>();
            const auto n = entry.at("count").get<std::uint64_t>();
            if (n != num::element_count(shape) || offset > count || n > count - offset) {
                throw FormatError(path + ": array index out of range");
            }
            std::vector<double> values(n);
            if (n) std::memcpy(values.data(), payload + offset * sizeof(double), n * sizeof(double));
            c.arrays.push_back({entry.at("name").get<std::string>(), Tensor(shape, std::move(values))});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": malformed header: " + e.what());
    } catch (const NumericError& e) {
        throw FormatError(path + ": non-finite array value: " + e.what());
    }
    if (c.kind != expected_kind) {
        throw FormatError(path + ": expected a " + expected_kind + " container, found " + c.kind);
    }
    return c;
}

}  // namespace aqc::io
