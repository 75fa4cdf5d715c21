#include <fstream>
#include <iterator>
#include <string>

#include "stimtrain/error.hpp"
#include "stimtrain/imgops.hpp"

namespace stimtrain::img {

Dataset read_cifar10_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open CIFAR-10 file " + file.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError(file.string() + ": truncated record at byte offset " +
                      std::to_string(records * kCifarRecordBytes) + " (file is " +
                      std::to_string(bytes.size()) + " bytes, records are " +
                      std::to_string(kCifarRecordBytes) + " bytes)");
  }
  if (records == 0) throw FormatError(file.string() + ": no records");

  constexpr int plane = kCifarSide * kCifarSide;
  Dataset ds;
  ds.num_classes = 10;
  ds.images = Tensor<float>(static_cast<int>(records), 3, kCifarSide, kCifarSide);
  ds.labels.resize(records);
  for (std::size_t r = 0; r < records; ++r) {
    const std::size_t base = r * kCifarRecordBytes;
    const int label = bytes[base];
    if (label > 9) {
      throw FormatError(file.string() + ": label " + std::to_string(label) + " at byte offset " +
                        std::to_string(base) + " is outside [0, 9]");
    }
    ds.labels[r] = label;
    float* dst = ds.images.data.data() + r * 3 * plane;
    for (int i = 0; i < 3 * plane; ++i) dst[i] = static_cast<float>(bytes[base + 1 + i]) / 255.0f;
  }
  return ds;
}

Dataset load_cifar10_binary(const std::filesystem::path& path, Split split, Normalization norm) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_regular_file(path)) {
    files.push_back(path);
  } else if (split == Split::train) {
    for (int i = 1; i <= 5; ++i) files.push_back(path / ("data_batch_" + std::to_string(i) + ".bin"));
  } else {
    files.push_back(path / "test_batch.bin");
  }

  std::vector<Dataset> parts;
  std::size_t total = 0;
  for (const auto& f : files) {
    parts.push_back(read_cifar10_file(f));
    total += parts.back().labels.size();
  }
  Dataset ds;
  ds.num_classes = 10;
  ds.norm = std::move(norm);
  ds.images = Tensor<float>(static_cast<int>(total), 3, kCifarSide, kCifarSide);
  std::size_t at = 0;
  for (auto& p : parts) {
    std::copy(p.images.data.begin(), p.images.data.end(), ds.images.data.begin() + at * p.images.sample_size());
    ds.labels.insert(ds.labels.end(), p.labels.begin(), p.labels.end());
    at += p.labels.size();
  }
  return ds;
}

}  // namespace stimtrain::img
