#include "ilasr/param_io.hpp"

#include "ilasr/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace ilasr {

namespace {

constexpr const char* kFormat = "ilasr-paramset";

void put_f32le(std::string& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((bits >> shift) & 0xffu));
  }
}

double get_f32le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return static_cast<double>(std::bit_cast<float>(bits));
}

std::array<std::array<long, 2>, 4> segment_shapes(ModelDims d) {
  return {{{d.hidden, d.featdim}, {d.hidden, 1}, {d.vocab, d.hidden}, {d.vocab, 1}}};
}

}  // namespace

std::string serialize_params(const ParamSet& params) {
  nlohmann::ordered_json header;
  header["format"] = kFormat;
  header["dtype"] = "f32le";
  header["dims"] = {{"featdim", params.dims.featdim},
                    {"hidden", params.dims.hidden},
                    {"vocab", params.dims.vocab}};
  header["version"] = params.version;
  const auto shapes = segment_shapes(params.dims);
  auto segments = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    auto shape = nlohmann::ordered_json::array({shapes[i][0]});
    if (i % 2 == 0) shape.push_back(shapes[i][1]);
    segments.push_back({{"name", Segments::kNames[i]}, {"shape", shape}});
  }
  header["segments"] = segments;

  std::string out = header.dump();
  out.push_back('\n');
  out.reserve(out.size() + 4 * params.size());
  for (const auto& seg : params.flat()) {
    for (Eigen::Index i = 0; i < seg.size(); ++i) put_f32le(out, seg[i]);
  }
  return out;
}

ParamSet deserialize_params(const std::string& bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) {
    throw FileError("parameter file has no header line");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::exception& e) {
    throw FileError(std::string("parameter file header is not JSON: ") + e.what());
  }
  if (header.value("format", "") != kFormat || header.value("dtype", "") != "f32le") {
    throw FileError("parameter file has an unknown format or dtype");
  }
  ModelDims dims;
  try {
    dims.featdim = header.at("dims").at("featdim").get<int>();
    dims.hidden = header.at("dims").at("hidden").get<int>();
    dims.vocab = header.at("dims").at("vocab").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FileError(std::string("parameter file header lacks dims: ") + e.what());
  }
  ParamSet params(dims);
  params.version = header.value("version", std::int64_t{0});

  const auto& names = header.at("segments");
  if (names.size() != 4) throw FileError("parameter file must list 4 segments");
  for (std::size_t i = 0; i < 4; ++i) {
    if (names[i].at("name").get<std::string>() != Segments::kNames[i]) {
      throw FileError("unexpected segment order in parameter file");
    }
  }

  const std::size_t expected = newline + 1 + 4 * params.size();
  if (bytes.size() != expected) {
    throw FileError("parameter file payload has " + std::to_string(bytes.size() - newline - 1) +
                    " bytes, expected " + std::to_string(4 * params.size()));
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + newline + 1;
  for (auto seg : params.flat()) {
    for (Eigen::Index i = 0; i < seg.size(); ++i, p += 4) seg[i] = get_f32le(p);
  }
  return params;
}

void save_params(const ParamSet& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open '" + path.string() + "' for writing");
  const auto bytes = serialize_params(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FileError("failed writing '" + path.string() + "'");
}

ParamSet load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open model file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize_params(buf.str());
  } catch (const FileError& e) {
    throw FileError("'" + path.string() + "': " + e.what());
  }
}

ParamSet round_to_f32(const ParamSet& params) {
  ParamSet out = params;
  for (auto seg : out.flat()) {
    for (Eigen::Index i = 0; i < seg.size(); ++i) seg[i] = static_cast<float>(seg[i]);
  }
  return out;
}

}  // namespace ilasr
