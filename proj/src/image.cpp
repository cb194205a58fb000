#include "sia/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "sia/errors.hpp"

namespace sia {

namespace {

cv::Mat to_mat(const Image& img) {
    // BGR order is irrelevant here: all geometry ops are channel-agnostic and
    // we convert back with the same layout.
    cv::Mat m(img.height, img.width, CV_8UC3);
    std::copy(img.data.begin(), img.data.end(), m.data);
    return m;
}

Image from_mat(const cv::Mat& m) {
    CV_Assert(m.type() == CV_8UC3 && m.isContinuous());
    Image img(m.rows, m.cols);
    std::copy(m.data, m.data + img.data.size(), img.data.begin());
    return img;
}

}  // namespace

Image load_image(const std::filesystem::path& file) {
    cv::Mat m = cv::imread(file.string(), cv::IMREAD_COLOR);
    if (m.empty()) {
        throw ValidationError("cannot read image file: " + file.string());
    }
    if (!m.isContinuous()) m = m.clone();
    cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
    return from_mat(m);
}

void save_png(const Image& img, const std::filesystem::path& file) {
    if (img.empty()) throw ValidationError("refusing to save empty image: " + file.string());
    cv::Mat m = to_mat(img);
    cv::cvtColor(m, m, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(file.string(), m)) {
        throw ValidationError("cannot write image file: " + file.string());
    }
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (img.empty() || out_h <= 0 || out_w <= 0) {
        throw ValidationError("resize_bilinear: empty input or non-positive target size");
    }
    if (out_h == img.height && out_w == img.width) return img;
    cv::Mat dst;
    cv::resize(to_mat(img), dst, cv::Size(out_w, out_h), 0, 0, cv::INTER_LINEAR);
    return from_mat(dst);
}

Image rotate_bilinear(const Image& img, double degrees) {
    cv::Mat src = to_mat(img);
    cv::Point2f center(static_cast<float>(img.width) / 2.f, static_cast<float>(img.height) / 2.f);
    cv::Mat rot = cv::getRotationMatrix2D(center, degrees, 1.0);
    cv::Mat dst;
    cv::warpAffine(src, dst, rot, src.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT,
                   cv::Scalar(0, 0, 0));
    return from_mat(dst);
}

Image hflip(const Image& img) {
    Image out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
    return out;
}

Image vflip(const Image& img) {
    Image out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
    return out;
}

Image center_crop_or_pad(const Image& img, int size) {
    if (img.empty() || size <= 0) {
        throw ValidationError("center_crop_or_pad: empty input or non-positive size");
    }
    if (img.height == size && img.width == size) return img;
    Image out(size, size);
    // Source window inside the input, destination offset inside the output.
    // floor() on the offsets leaves the extra row/column at the bottom/right.
    int copy_h = std::min(img.height, size);
    int copy_w = std::min(img.width, size);
    int src_y = (img.height - copy_h) / 2;
    int src_x = (img.width - copy_w) / 2;
    int dst_y = (size - copy_h) / 2;
    int dst_x = (size - copy_w) / 2;
    for (int y = 0; y < copy_h; ++y)
        for (int x = 0; x < copy_w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(dst_y + y, dst_x + x, c) = img.at(src_y + y, src_x + x, c);
    return out;
}

}  // namespace sia
