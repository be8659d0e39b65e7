#include "itemsim/model_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace itemsim {

namespace {

constexpr const char* kMagic = "itemsim-model";
constexpr int kVersion = 1;

void write_blob(std::ofstream& out, const std::vector<double>& values) {
    for (double v : values) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        unsigned char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

void read_blob(std::ifstream& in, std::vector<double>& values, size_t count,
               const std::string& path, const char* name) {
    values.resize(count);
    for (size_t idx = 0; idx < count; ++idx) {
        unsigned char bytes[8];
        in.read(reinterpret_cast<char*>(bytes), 8);
        if (!in) {
            throw IoError(path + ": truncated " + name + " blob (read " + std::to_string(idx) +
                          " of " + std::to_string(count) + " values)");
        }
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
        values[idx] = std::bit_cast<double>(bits);
    }
}

void write_header(std::ofstream& out, const std::string& kind,
                  const std::map<std::string, std::string>& fields) {
    out << "magic=" << kMagic << '\n';
    out << "version=" << kVersion << '\n';
    out << "model=" << kind << '\n';
    for (const auto& [key, value] : fields) out << key << '=' << value << '\n';
    out << '\n';
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

struct Header {
    std::string kind;
    std::map<std::string, std::string> fields;

    std::int64_t get_int(const std::string& key, const std::string& path) const {
        const auto it = fields.find(key);
        if (it == fields.end()) throw IoError(path + ": header misses '" + key + "'");
        try {
            return std::stoll(it->second);
        } catch (const std::exception&) {
            throw IoError(path + ": bad value for '" + key + "': " + it->second);
        }
    }
    double get_double(const std::string& key, const std::string& path) const {
        const auto it = fields.find(key);
        if (it == fields.end()) throw IoError(path + ": header misses '" + key + "'");
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw IoError(path + ": bad value for '" + key + "': " + it->second);
        }
    }
};

Header read_header(std::ifstream& in, const std::string& path) {
    Header header;
    std::string line;
    bool first = true;
    bool version_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            if (first) throw IoError(path + ": empty header");
            return header;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw IoError(path + ": malformed header line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (first) {
            if (key != "magic" || value != kMagic) {
                throw IoError(path + ": bad magic; not an itemsim model file");
            }
            first = false;
            continue;
        }
        if (key == "version") {
            if (value != std::to_string(kVersion)) {
                throw IoError(path + ": unsupported model format version " + value);
            }
            version_seen = true;
        } else if (key == "model") {
            header.kind = value;
        } else {
            header.fields[key] = value;
        }
    }
    if (first) throw IoError(path + ": empty header");
    if (!version_seen) throw IoError(path + ": header misses 'version'");
    throw IoError(path + ": header not terminated by a blank line");
}

void expect_eof(std::ifstream& in, const std::string& path) {
    char extra;
    if (in.read(&extra, 1)) {
        throw IoError(path + ": trailing bytes after the parameter blobs");
    }
}

}  // namespace

void save_model(const FismParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_header(out, "fism",
                 {{"num_items", std::to_string(params.num_items)},
                  {"k", std::to_string(params.k)},
                  {"alpha", fmt(params.alpha)}});
    write_blob(out, params.P);
    write_blob(out, params.Q);
    if (!out) throw IoError("write failed for " + path);
}

void save_model(const NaisParams& params, const std::string& path) {
    params.check_shapes();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_header(out, params.variant == AttentionVariant::concat ? "nais-concat" : "nais-prod",
                 {{"num_items", std::to_string(params.num_items)},
                  {"k", std::to_string(params.k)},
                  {"a", std::to_string(params.a)},
                  {"beta", fmt(params.beta)}});
    write_blob(out, params.P);
    write_blob(out, params.Q);
    write_blob(out, params.W);
    write_blob(out, params.b);
    write_blob(out, params.h);
    if (!out) throw IoError("write failed for " + path);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    const Header header = read_header(in, path);

    const auto num_items = header.get_int("num_items", path);
    const auto k = header.get_int("k", path);
    if (num_items < 1 || k < 1) throw IoError(path + ": invalid dimensions in header");
    const size_t table = static_cast<size_t>(num_items) * static_cast<size_t>(k);

    if (header.kind == "fism") {
        FismParams params;
        params.num_items = static_cast<std::int32_t>(num_items);
        params.k = static_cast<std::int32_t>(k);
        params.alpha = header.get_double("alpha", path);
        read_blob(in, params.P, table, path, "P");
        read_blob(in, params.Q, table, path, "Q");
        expect_eof(in, path);
        return params;
    }
    if (header.kind == "nais-concat" || header.kind == "nais-prod") {
        NaisParams params;
        params.num_items = static_cast<std::int32_t>(num_items);
        params.k = static_cast<std::int32_t>(k);
        params.a = static_cast<std::int32_t>(header.get_int("a", path));
        params.beta = header.get_double("beta", path);
        params.variant = header.kind == "nais-concat" ? AttentionVariant::concat
                                                      : AttentionVariant::prod;
        if (params.a < 1) throw IoError(path + ": invalid attention factor in header");
        read_blob(in, params.P, table, path, "P");
        read_blob(in, params.Q, table, path, "Q");
        read_blob(in, params.W,
                  static_cast<size_t>(params.a) * static_cast<size_t>(params.input_dim()), path,
                  "W");
        read_blob(in, params.b, static_cast<size_t>(params.a), path, "b");
        read_blob(in, params.h, static_cast<size_t>(params.a), path, "h");
        expect_eof(in, path);
        try {
            params.check_shapes();
        } catch (const ConfigError& e) {
            throw IoError(path + ": " + e.what());
        }
        return params;
    }
    throw IoError(path + ": unknown model kind '" + header.kind + "'");
}

FismParams load_fism_model(const std::string& path) {
    auto loaded = load_model(path);
    if (auto* fism = std::get_if<FismParams>(&loaded)) return std::move(*fism);
    throw IoError(path + ": expected a fism model file");
}

NaisParams load_nais_model(const std::string& path) {
    auto loaded = load_model(path);
    if (auto* nais = std::get_if<NaisParams>(&loaded)) return std::move(*nais);
    throw IoError(path + ": expected a nais model file");
}

}  // namespace itemsim
