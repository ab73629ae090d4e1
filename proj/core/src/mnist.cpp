#include "fluxfed/mnist.hpp"

#include <cstdint>
#include <fstream>

#include "fluxfed/errors.hpp"

namespace fluxfed {

namespace {

std::uint32_t read_be32(std::ifstream& f, std::size_t& offset, const std::string& path) {
    unsigned char buf[4];
    f.read(reinterpret_cast<char*>(buf), 4);
    if (!f) throw ParseError(path + ": truncated header", offset);
    offset += 4;
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

MnistData load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                         std::size_t limit) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw ParseError(images_path + ": cannot open", 0);
    std::size_t off = 0;
    std::uint32_t magic = read_be32(img, off, images_path);
    if (magic != 0x00000803u)
        throw ParseError(images_path + ": bad image magic", off - 4);
    std::uint32_t n = read_be32(img, off, images_path);
    std::uint32_t rows = read_be32(img, off, images_path);
    std::uint32_t cols = read_be32(img, off, images_path);
    if (rows != 28 || cols != 28)
        throw ParseError(images_path + ": expected 28x28 images", off - 8);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw ParseError(labels_path + ": cannot open", 0);
    std::size_t loff = 0;
    std::uint32_t lmagic = read_be32(lab, loff, labels_path);
    if (lmagic != 0x00000801u)
        throw ParseError(labels_path + ": bad label magic", loff - 4);
    std::uint32_t ln = read_be32(lab, loff, labels_path);
    if (ln != n) throw ParseError(labels_path + ": label/image count mismatch", loff - 4);

    std::size_t take = limit == 0 ? n : std::min<std::size_t>(limit, n);
    MnistData data;
    data.features = Matrix(take, 784);
    data.labels.resize(take);

    std::vector<unsigned char> pix(784);
    for (std::size_t i = 0; i < take; ++i) {
        img.read(reinterpret_cast<char*>(pix.data()), 784);
        if (!img) throw ParseError(images_path + ": truncated image data", off);
        off += 784;
        double* row = data.features.row(i);
        for (std::size_t j = 0; j < 784; ++j) row[j] = pix[j] / 255.0;

        unsigned char y;
        lab.read(reinterpret_cast<char*>(&y), 1);
        if (!lab) throw ParseError(labels_path + ": truncated label data", loff);
        loff += 1;
        if (y > 9) throw ParseError(labels_path + ": label out of range", loff - 1);
        data.labels[i] = y;
    }
    return data;
}

Matrix apply_rotation_to_images(const Matrix& images, int degrees) {
    if (images.cols != 784) throw ConfigError("image rows must be flattened 28x28");
    if (degrees % 90 != 0 || degrees < 0 || degrees > 270)
        throw ConfigError("rotation must be one of 0, 90, 180, 270");
    if (degrees == 0) return images;

    Matrix out(images.rows, 784);
    for (std::size_t i = 0; i < images.rows; ++i) {
        const double* src = images.row(i);
        double* dst = out.row(i);
        for (int r = 0; r < 28; ++r) {
            for (int c = 0; c < 28; ++c) {
                int sr, sc;  // source pixel landing at (r, c)
                if (degrees == 90) {        // clockwise: (r,c) <- (27-c, r)
                    sr = 27 - c; sc = r;
                } else if (degrees == 180) {
                    sr = 27 - r; sc = 27 - c;
                } else {                    // 270 clockwise == 90 ccw: (r,c) <- (c, 27-r)
                    sr = c; sc = 27 - r;
                }
                dst[r * 28 + c] = src[sr * 28 + sc];
            }
        }
    }
    return out;
}

}  // namespace fluxfed
