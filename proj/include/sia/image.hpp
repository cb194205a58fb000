#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sia {

// 8-bit RGB raster with value semantics. Row-major, interleaved channels.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // height*width*3

    Image() = default;
    Image(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0) {}

    std::uint8_t& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    bool empty() const { return data.empty(); }

    bool operator==(const Image&) const = default;
};

// PNG or TIFF, forced to 3-band 8-bit. Throws ValidationError naming the path.
Image load_image(const std::filesystem::path& file);
void save_png(const Image& img, const std::filesystem::path& file);

Image resize_bilinear(const Image& img, int out_h, int out_w);

// Rotates about the image center, bilinear, exposed corners zero-filled.
// Output has the same size as the input.
Image rotate_bilinear(const Image& img, double degrees);

Image hflip(const Image& img);
Image vflip(const Image& img);

// Center-crops or zero-pads to size x size. Odd remainders put the extra
// row/column on the bottom/right.
Image center_crop_or_pad(const Image& img, int size);

}  // namespace sia
