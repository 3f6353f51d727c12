#include "amore/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "amore/error.hpp"

namespace amore::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "blob format assumes a little-endian host");

void write_blob(const fs::path& path, const std::vector<double>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!out) throw IoError("short write to " + path.string());
}

std::vector<double> read_blob(const fs::path& path, std::size_t expected_count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != expected_count * sizeof(double)) {
        throw IoError(path.string() + ": expected " + std::to_string(expected_count) +
                      " doubles, file has " + std::to_string(bytes) + " bytes");
    }
    in.seekg(0);
    std::vector<double> data(expected_count);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw IoError("short read from " + path.string());
    return data;
}

void write_json(const fs::path& path, const Json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

Json to_json(const StateSchema& s) {
    Json j;
    j["names"] = s.names;
    j["temperature_index"] = s.temperature_index ? Json(*s.temperature_index) : Json(nullptr);
    j["mass_group"] = s.mass_group;
    j["log_transform"] = s.log_transform;
    return j;
}

StateSchema schema_from_json(const Json& j) {
    StateSchema s;
    try {
        s.names = j.at("names").get<std::vector<std::string>>();
        if (j.contains("temperature_index") && !j["temperature_index"].is_null()) {
            s.temperature_index = j["temperature_index"].get<std::size_t>();
        }
        s.mass_group = j.value("mass_group", std::vector<std::size_t>{});
        s.log_transform = j.value("log_transform", std::vector<bool>(s.names.size(), true));
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("schema: ") + e.what());
    }
    s.validate();
    return s;
}

Json to_json(const NormalizationParams& p) { return Json{{"min", p.min}, {"max", p.max}}; }

NormalizationParams normalization_from_json(const Json& j) {
    try {
        return {j.at("min").get<std::vector<double>>(), j.at("max").get<std::vector<double>>()};
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("normalization: ") + e.what());
    }
}

Json shape_to_json(const Shape& s) { return Json(s); }

Shape shape_from_json(const Json& j) { return j.get<Shape>(); }

Json save_tensor(const fs::path& dir, const std::string& name, const Tensor& t) {
    const std::string file = name + ".f64";
    write_blob(dir / file, t.buffer());
    return Json{{"name", name}, {"file", file}, {"shape", shape_to_json(t.shape())}};
}

Tensor load_tensor(const fs::path& dir, const Json& entry) {
    Shape shape = shape_from_json(entry.at("shape"));
    auto data = read_blob(dir / entry.at("file").get<std::string>(), shape_numel(shape));
    return Tensor(std::move(shape), std::move(data));
}

std::vector<char> file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace amore::io
