#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forensics/common.hpp"

namespace forensics {

/// One evaluated image. Paths are resolved (absolute or relative to the
/// working directory) by the time a sample leaves load_manifest.
struct ImageSample {
    std::string id;
    std::filesystem::path image_path;
    Label label = Label::Real;
    Generator generator = Generator::None;
    Scope scope = Scope::None;
    Content content = Content::General;
    std::string dataset_name;
    std::optional<std::filesystem::path> gt_path;
    std::optional<std::filesystem::path> mask_path;

    bool operator==(const ImageSample&) const = default;
};

/// Throws SchemaError when the label/generator/scope/mask invariants fail.
void validate_sample(const ImageSample& s);

struct Manifest {
    std::vector<ImageSample> entries;
    std::filesystem::path source_path;

    const ImageSample* find(std::string_view id) const;
    bool operator==(const Manifest&) const = default;
};

/// Reads a JSON-Lines manifest. Relative paths inside it are resolved
/// against the manifest's directory; every referenced file must exist.
Manifest load_manifest(const std::filesystem::path& path);

/// Parses a single manifest line (no file checks). `base_dir` resolves
/// relative paths.
ImageSample sample_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Wire form of a sample; optional fields are omitted rather than null.
nlohmann::json sample_to_json(const ImageSample& s);

struct EncodedImage {
    std::string media_type;  // e.g. "image/png"
    std::string base64;
    int width = 0;
    int height = 0;
    std::string content_sha256;  // hash of the original file bytes

    std::string data_url() const { return "data:" + media_type + ";base64," + base64; }
};

/// Base64 payload for a vision-chat request. With `max_edge` set and the
/// image larger than it, the image is downscaled (aspect preserved) and
/// re-encoded in its original format; otherwise the original bytes pass
/// through untouched.
EncodedImage encode_image(const std::filesystem::path& path,
                          std::optional<int> max_edge = std::nullopt);

std::string base64_encode(std::string_view bytes);

}  // namespace forensics
