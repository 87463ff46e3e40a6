// SPDX-License-Identifier: Apache-2.0

#include "xfer/image_store.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cstdlib>

#include "xfer/synthetic.hpp"

namespace xfer {

DefaultImageStore::DefaultImageStore(std::filesystem::path root, bool cache) : root_(std::move(root)), cache_(cache) {}

std::filesystem::path DefaultImageStore::root_from_environment() {
    const char* root = std::getenv("XFER_DATA_ROOT");
    return root ? std::filesystem::path(root) : std::filesystem::path{};
}

Image DefaultImageStore::load(const std::string& image_ref) const {
    if (!cache_) return decode(image_ref);
    {
        std::lock_guard lock(mutex_);
        if (auto it = memo_.find(image_ref); it != memo_.end()) return *it->second;
    }
    auto img = std::make_shared<const Image>(decode(image_ref));
    std::lock_guard lock(mutex_);
    memo_.emplace(image_ref, img);
    return *img;
}

Image DefaultImageStore::decode(const std::string& image_ref) const {
    if (synthetic::is_synthetic_ref(image_ref)) {
        try {
            return synthetic::render(image_ref);
        } catch (const std::exception& e) {
            throw DecodeError(image_ref, e.what());
        }
    }
    std::filesystem::path p(image_ref);
    if (p.is_relative() && !root_.empty()) p = root_ / p;
    cv::Mat raw = cv::imread(p.string(), cv::IMREAD_UNCHANGED);
    if (raw.empty()) throw DecodeError(image_ref, "cannot decode image '" + p.string() + "'");
    cv::Mat mat;
    const double scale = raw.depth() == CV_16U ? 1.0 / 65535.0 : raw.depth() == CV_8U ? 1.0 / 255.0 : 1.0;
    raw.convertTo(mat, CV_32F, scale);
    int channels = mat.channels();
    if (channels == 4) {
        cv::Mat bgr(mat.rows, mat.cols, CV_32FC3);
        cv::mixChannels(mat, bgr, {0, 0, 1, 1, 2, 2});
        mat = bgr;
        channels = 3;
    } else if (channels == 2) {
        cv::Mat gray(mat.rows, mat.cols, CV_32FC1);
        cv::mixChannels(mat, gray, {0, 0});
        mat = gray;
        channels = 1;
    }
    Image img(mat.rows, mat.cols, channels);
    for (int y = 0; y < mat.rows; ++y) {
        const float* row = mat.ptr<float>(y);
        for (int x = 0; x < mat.cols; ++x) {
            for (int c = 0; c < channels; ++c) {
                // OpenCV stores BGR; images are kept RGB.
                const int src = channels == 3 ? 2 - c : c;
                img.at(y, x, c) = row[x * channels + src];
            }
        }
    }
    return img;
}

}  // namespace xfer
