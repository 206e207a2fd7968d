#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace fedgkd::verify {

enum class Status { kPass, kFail, kSkip };

struct CriterionResult {
  int id = 0;
  std::string name;
  Status status = Status::kFail;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;  // 0: no runtime bound
};

struct AcceptanceOptions {
  // Canonical dataset directory for the citation-graph reproduction; the
  // check is skipped without it.
  std::optional<std::filesystem::path> cora_dir;
  int workers = 1;
  std::ostream* log = nullptr;
};

CriterionResult check_gradients();
CriterionResult check_matrix_exp();
CriterionResult check_gumbel_limit();
CriterionResult check_fedavg_reduction();
CriterionResult check_heterogeneity(const AcceptanceOptions& opts);
CriterionResult check_cora(const AcceptanceOptions& opts);
CriterionResult check_gamma_monotone();
CriterionResult check_determinism();

/// Runs the selected criteria (all when empty) in id order.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts, const std::vector<int>& only = {});

/// One line per criterion: "PASS|FAIL|SKIP  <id>  <name>  <detail>  (<s>s)".
void print_results(std::ostream& os, const std::vector<CriterionResult>& results);

/// Process exit code: 0 iff nothing failed.
int exit_code(const std::vector<CriterionResult>& results);

}  // namespace fedgkd::verify
