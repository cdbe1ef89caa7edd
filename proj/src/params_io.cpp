#include "prb/params_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace prb::nn {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
    bool eof() const { return pos_ >= b_.size(); }
    std::uint8_t u8() {
        need(1);
        return b_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
        pos_ += 8;
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(&b_[pos_]), n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > b_.size()) throw std::runtime_error("params file: truncated");
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> serialize_params(const ParameterSet& params) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'P', 'R', 'B', 'M'});
    put_u16(out, kParamsFormatVersion);
    for (const auto& e : params.entries()) {
        put_u16(out, static_cast<std::uint16_t>(e.name.size()));
        out.insert(out.end(), e.name.begin(), e.name.end());
        out.push_back(static_cast<std::uint8_t>(e.value.rank()));
        if (e.value.rank() == 1) {
            put_u32(out, static_cast<std::uint32_t>(e.value.cols()));
        } else {
            put_u32(out, static_cast<std::uint32_t>(e.value.rows()));
            put_u32(out, static_cast<std::uint32_t>(e.value.cols()));
        }
        for (double d : e.value.data()) put_f64(out, d);
    }
    return out;
}

ParameterSet deserialize_params(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (r.str(4) != "PRBM") throw std::runtime_error("params file: bad magic");
    const std::uint16_t version = r.u16();
    if (version != kParamsFormatVersion)
        throw std::runtime_error("params file: unsupported version " + std::to_string(version));
    ParameterSet params;
    while (!r.eof()) {
        const std::uint16_t name_len = r.u16();
        const std::string name = r.str(name_len);
        const std::uint8_t rank = r.u8();
        if (rank != 1 && rank != 2) throw std::runtime_error("params file: bad rank");
        std::size_t rows = 1, cols;
        if (rank == 1) {
            cols = r.u32();
        } else {
            rows = r.u32();
            cols = r.u32();
        }
        std::vector<double> data(rows * cols);
        for (double& d : data) d = r.f64();
        Tensor t = (rank == 1) ? Tensor::vec(std::move(data))
                               : Tensor::matrix(rows, cols, std::move(data));
        params.add(name, std::move(t));
    }
    return params;
}

void save_params_file(const std::string& path, const ParameterSet& params) {
    const auto bytes = serialize_params(params);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

ParameterSet load_params_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_params(bytes);
}

std::string params_fingerprint(const ParameterSet& params) {
    const auto bytes = serialize_params(params);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace prb::nn
