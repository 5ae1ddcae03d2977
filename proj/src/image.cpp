#include "srpeval/image.hpp"

#include <algorithm>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "srpeval/error.hpp"

namespace srpeval {

std::string_view to_string(MediaType m) { return m == MediaType::Png ? "png" : "jpeg"; }
std::string_view mime_type(MediaType m) { return m == MediaType::Png ? "image/png" : "image/jpeg"; }
std::string_view file_extension(MediaType m) { return m == MediaType::Png ? ".png" : ".jpg"; }

std::optional<MediaType> parse_media_type(std::string_view s) {
    if (s == "png") return MediaType::Png;
    if (s == "jpeg") return MediaType::Jpeg;
    return std::nullopt;
}

std::optional<MediaType> sniff_media_type(std::span<const std::uint8_t> b) {
    static constexpr std::uint8_t kPng[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (b.size() >= 8 && std::equal(kPng, kPng + 8, b.begin())) return MediaType::Png;
    if (b.size() >= 3 && b[0] == 0xff && b[1] == 0xd8 && b[2] == 0xff) return MediaType::Jpeg;
    return std::nullopt;
}

namespace {

cv::Mat decode(std::span<const std::uint8_t> bytes) {
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat img;
    try {
        img = cv::imdecode(buf, cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        throw Error(ErrorClass::UnreadableImage, std::string("image decode failed: ") + e.what());
    }
    if (img.empty()) throw Error(ErrorClass::UnreadableImage, "image decode failed");
    return img;
}

}  // namespace

ImageInfo probe_image(std::span<const std::uint8_t> bytes) {
    auto type = sniff_media_type(bytes);
    if (!type) throw Error(ErrorClass::UnsupportedMediaType, "image is neither PNG nor JPEG");
    const cv::Mat img = decode(bytes);
    return {*type, img.cols, img.rows};
}

std::vector<std::uint8_t> stitch_vertical(std::span<const std::vector<std::uint8_t>> images) {
    if (images.empty()) throw Error(ErrorClass::InvalidArgument, "stitch_vertical: no images");
    std::vector<cv::Mat> mats;
    int width = 0;
    for (const auto& bytes : images) {
        mats.push_back(decode(bytes));
        width = std::max(width, mats.back().cols);
    }
    for (auto& m : mats)
        if (m.cols < width)
            cv::copyMakeBorder(m, m, 0, 0, 0, width - m.cols, cv::BORDER_CONSTANT, cv::Scalar(255, 255, 255));
    cv::Mat stacked;
    cv::vconcat(mats, stacked);
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", stacked, out)) throw Error(ErrorClass::Io, "png encode failed");
    return out;
}

}  // namespace srpeval
