// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "xfer/image.hpp"

namespace xfer {

class DecodeError : public std::runtime_error {
public:
    DecodeError(std::string image_ref, const std::string& what)
        : std::runtime_error(what + " [" + image_ref + "]"), image_ref_(std::move(image_ref)) {}
    const std::string& image_ref() const { return image_ref_; }

private:
    std::string image_ref_;
};

// Resolves manifest image_refs to pixels.
class ImageStore {
public:
    virtual ~ImageStore() = default;
    virtual Image load(const std::string& image_ref) const = 0;
};

// `synth://` refs are rendered procedurally; anything else is a file path,
// relative paths resolved against `root`. Files are decoded with OpenCV and
// converted to RGB (or kept as single-channel grayscale).
class DefaultImageStore : public ImageStore {
public:
    explicit DefaultImageStore(std::filesystem::path root = {}, bool cache = false);

    // $XFER_DATA_ROOT, or empty when unset.
    static std::filesystem::path root_from_environment();

    Image load(const std::string& image_ref) const override;

private:
    Image decode(const std::string& image_ref) const;

    std::filesystem::path root_;
    bool cache_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, std::shared_ptr<const Image>> memo_;
};

}  // namespace xfer
