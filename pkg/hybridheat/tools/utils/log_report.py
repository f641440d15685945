import json
import logging
from functools import wraps

# Configure module-level logger
logger = logging.getLogger("log_report")
logger.setLevel(logging.INFO)


# Define the decorator function
def log_report(parser_function=None):
    """
    Decorator to log `result.model_dump_json()` each time the decorated function returns a report.
    """

    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            result = func(*args, **kwargs)
            json_data = None
            if hasattr(result, "model_dump_json"):
                json_data = json.loads(result.model_dump_json())
                logger.debug(json.dumps(json_data, sort_keys=True))
            # Pass to parser_function if provided
            if json_data is not None and parser_function and callable(parser_function):
                try:
                    jsonl_row = parser_function(json_data)
                    logger.info(f"{jsonl_row}")
                except Exception as e:
                    logger.error(f"Error in parsing function: {e}")
            return result

        return wrapper

    return decorator


def summarize_report(data):
    """
    Extracts the headline numbers of a report into a single JSONL row (string).

    Specifically:
    1. Exponent reports: the mode, the sample exponent and one (p, exponent) pair per moment.
    2. Estimate reports: quantity, estimate, standard error, reference and z-score.
    3. Verification reports: number of trials, worst gap and whether every trial passed.

    Args:
        data (dict): The JSON structure of a report.

    Returns:
        str: A single JSONL row containing the extracted data.
    """

    summary = {}

    if "sample_exponent" in data and "mode" in data:
        mode = data["mode"]
        summary["mode"] = mode
        summary["sample_exponent"] = data["sample_exponent"].get(mode)
        summary["moments"] = [[m["p"], m["exponent"]] for m in data.get("moments", [])]

    elif "estimate" in data:
        for key in ("quantity", "p", "estimate", "standard_error", "reference", "z_score", "heavy_tail"):
            if data.get(key) is not None:
                summary[key] = data[key]

    elif "trials" in data:
        summary["trials"] = len(data["trials"])
        summary["worst_gap"] = data.get("worst_gap")
        summary["passed"] = data.get("passed")

    return json.dumps(summary, sort_keys=True)
