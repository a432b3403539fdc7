#include "ltdlab/video.hpp"

#include "ltdlab/error.hpp"

namespace ltd {

PixelVideo::PixelVideo(Tensor t) : tensor(std::move(t)) {
    if (tensor.rank() != 4) throw InvalidShape("pixel video must be rank 4 (F,H,W,C), got " + tensor.shape().str());
    if (tensor.dim(3) != 1 && tensor.dim(3) != 3) throw InvalidShape("pixel video channels must be 1 or 3");
    for (double v : tensor.data()) {
        if (v < 0.0 || v > 1.0) throw InvalidInput("pixel video value outside [0,1]");
    }
}

LatentVideo::LatentVideo(Tensor t) : tensor(std::move(t)) {
    if (tensor.rank() != 4) throw InvalidShape("latent video must be rank 4 (F,H,W,C), got " + tensor.shape().str());
}

}  // namespace ltd
