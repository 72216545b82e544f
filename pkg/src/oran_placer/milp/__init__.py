from .lpformat import (LpFormatError, emit_lp, lp_text, parse_lp, parse_solution, read_lp,
                       read_solution, solution_text, write_solution)
from .model import (AUX_KM, Constraint, InconsistentAssignmentError, MilpError, MilpImportError,
                    MilpModel, ModelTooLargeError, SolutionReport, Variable, build_model,
                    check_solution, count_formula, count_model, default_big_m, encode_deployment,
                    import_solution, to_matrix_form)

__all__ = ["AUX_KM", "Constraint", "InconsistentAssignmentError", "LpFormatError", "MilpError",
           "MilpImportError", "MilpModel", "ModelTooLargeError", "SolutionReport", "Variable",
           "build_model", "check_solution", "count_formula", "count_model", "default_big_m",
           "emit_lp", "encode_deployment", "import_solution", "lp_text", "parse_lp",
           "parse_solution", "read_lp", "read_solution", "solution_text", "to_matrix_form",
           "write_solution"]
