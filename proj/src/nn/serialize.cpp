#include "evotraj/nn/serialize.hpp"

#include <nlohmann/json.hpp>

#include "evotraj/errors.hpp"
#include "evotraj/io_util.hpp"

namespace evotraj::nn {

namespace fs = std::filesystem;

namespace {

constexpr int kParameterFormatVersion = 1;

fs::path with_suffix(const fs::path& stem, const char* suffix) {
  fs::path p = stem;
  p += suffix;
  return p;
}

}  // namespace

void save_parameters(std::span<Parameter* const> params, const fs::path& stem) {
  nlohmann::json descriptor;
  descriptor["format_version"] = kParameterFormatVersion;
  nlohmann::json entries = nlohmann::json::object();
  std::string blob;
  std::size_t offset = 0;
  for (const Parameter* p : params) {
    entries[p->name] = {{"offset", offset}, {"shape", p->value.shape}};
    append_f32_le(blob, p->value.values);
    offset += p->value.size();
  }
  descriptor["parameters"] = std::move(entries);
  descriptor["count"] = offset;
  write_file_atomic(with_suffix(stem, ".f32"), blob);
  write_file_atomic(with_suffix(stem, ".json"), descriptor.dump(2) + "\n");
}

void load_parameters(std::span<Parameter* const> params, const fs::path& stem) {
  const fs::path json_file = with_suffix(stem, ".json");
  const fs::path blob_file = with_suffix(stem, ".f32");
  nlohmann::json descriptor;
  try {
    descriptor = nlohmann::json::parse(read_file(json_file));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(json_file, std::string("corrupt descriptor: ") + e.what());
  }
  const int version = descriptor.value("format_version", 0);
  if (version != kParameterFormatVersion) throw FormatVersionError(json_file, version, kParameterFormatVersion);

  const std::string blob = read_file(blob_file);
  const auto& entries = descriptor.at("parameters");
  for (Parameter* p : params) {
    if (!entries.contains(p->name)) throw FormatError(json_file, "missing parameter " + p->name);
    const auto& e = entries.at(p->name);
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    if (shape != p->value.shape)
      throw FormatError(json_file, "shape of " + p->name + " is " + shape_string(shape) + ", expected " +
                                       shape_string(p->value.shape));
    const std::size_t offset = e.at("offset").get<std::size_t>();
    if ((offset + p->value.size()) * 4 > blob.size())
      throw FormatError(blob_file, "truncated: parameter " + p->name + " extends past end of file");
    read_f32_le(std::string_view(blob).substr(offset * 4, p->value.size() * 4), p->value.values);
  }
}

}  // namespace evotraj::nn
