#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace slicelift::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Default worker count for multi-case runs when --jobs is not given.
inline constexpr const char* kJobsEnv = "SLICELIFT_JOBS";

// Case directory: imaging.nii.gz, optional segmentation.nii.gz and
// detections.json, generated files under derived/. The scan id is the
// directory name.
struct CaseLayout {
  std::filesystem::path root;

  std::string scan_id() const;
  std::filesystem::path imaging() const { return root / "imaging.nii.gz"; }
  std::filesystem::path segmentation() const { return root / "segmentation.nii.gz"; }
  std::filesystem::path detections() const { return root / "detections.json"; }
  std::filesystem::path derived() const { return root / "derived"; }
};

// args excludes the program name. Returns an exit code; diagnostics go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace slicelift::cli
