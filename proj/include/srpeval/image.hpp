#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace srpeval {

enum class MediaType { Png, Jpeg };

std::string_view to_string(MediaType m);       // "png" / "jpeg"
std::string_view mime_type(MediaType m);       // "image/png" / "image/jpeg"
std::string_view file_extension(MediaType m);  // ".png" / ".jpg"
std::optional<MediaType> parse_media_type(std::string_view s);

/// Media type from magic bytes; nullopt for anything other than PNG or JPEG.
std::optional<MediaType> sniff_media_type(std::span<const std::uint8_t> bytes);

struct ImageInfo {
    MediaType media_type;
    int width = 0;
    int height = 0;
};

/// Sniffs and fully decodes the image. Throws Error(UnsupportedMediaType) for
/// unknown formats and Error(UnreadableImage) when decoding fails.
ImageInfo probe_image(std::span<const std::uint8_t> bytes);

/// Stacks images top-to-bottom into one PNG. Narrower images are padded on the
/// right with white.
std::vector<std::uint8_t> stitch_vertical(std::span<const std::vector<std::uint8_t>> images);

}  // namespace srpeval
