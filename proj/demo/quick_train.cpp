// Generates a small synthetic corpus, trains a x2 model for a few hundred
// iterations and compares it with bicubic on the held-out images.
//
//   demo_quick_train [out_dir] [iterations]

#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include "lapsr/pipeline/evaluate.hpp"
#include "lapsr/pipeline/train.hpp"

using namespace lapsr;

int main(int argc, char** argv) {
  const std::filesystem::path out = argc > 1 ? argv[1] : "quick_train_out";
  const std::uint64_t iters = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 300;

  const auto manifest = generate_synthetic_corpus({6, 4, 256, 256}, out / "corpus", 1);

  TrainConfig cfg;
  cfg.model.scale = 2;
  cfg.model.convs_per_level = 3;
  cfg.model.feature_channels = 32;
  cfg.optimizer = OptimizerKind::kAdam;
  cfg.lr = 1e-3;
  cfg.epochs = 1;
  cfg.iters_per_epoch = iters;
  cfg.batch = 2;
  cfg.patch = 64;

  TrainHooks hooks;
  hooks.on_iteration = [&](const TrainLogRow& row) {
    if (row.iter % 50 == 0 || row.iter == 1)
      std::printf("iter %4llu  loss %.4f\n", static_cast<unsigned long long>(row.iter), row.loss);
  };
  const auto result = train<float>(cfg, manifest, std::nullopt, out / "run", hooks);

  const auto model = evaluate(model_method(result.params), manifest, 2);
  const auto bicubic = evaluate(bicubic_method(), manifest, 2);
  std::printf("test split: model %.2f dB / %.4f, bicubic %.2f dB / %.4f\n", model.mean_psnr, model.mean_ssim,
              bicubic.mean_psnr, bicubic.mean_ssim);

  const auto& sample = manifest.entries.back();
  const Image hr = crop_to_multiple(load_image(out / "corpus" / sample.path), 2);
  const Image lr = quantize8(bicubic_resize(hr, hr.width / 2, hr.height / 2).clamp());
  save_image(superresolve(result.params, lr, 2), out / "sr.png");
  save_image(bicubic_method().upscale(lr, 2), out / "bicubic.png");
  std::printf("wrote %s\n", (out / "sr.png").string().c_str());
}
