import os


# A logger to write solver progress to the console and a log file in color
class Logger:

    # Mapping standard color names to ANSI color codes
    color_map = {
        "black": "30",
        "red": "31",
        "green": "32",
        "yellow": "33",
        "blue": "34",
        "magenta": "35",
        "cyan": "36",
        "white": "37",
        "gray": "37;2",
    }

    # Plain-text tags used in the log file, keyed by color
    level_map = {
        "red": "ERROR",
        "yellow": "WARN",
        "green": "OK",
        "gray": "DEBUG",
    }

    def __init__(self):
        self.logs = []  # Output logs
        self._log_file = None  # Output log file

    @property
    def log_file(self):
        return self._log_file

    # Setting a log file flushes everything logged so far into it
    @log_file.setter
    def log_file(self, filepath):
        self._log_file = filepath
        if filepath:
            with open(filepath, "w") as f:
                for entry in self.logs:
                    f.write(self.format_entry(entry))

    @staticmethod
    def quiet():
        return os.getenv("QC_SEMILINEAR_QUIET", "").lower() in ("1", "true", "yes")

    # Print to the terminal in color
    def print_colored(self, message, color=None):
        color_code = self.color_map.get(color)

        if color_code:
            print(f"\033[{color_code}m{message}\033[0m")
        else:
            print(message)

    def format_entry(self, entry):
        level = self.level_map.get(entry["color"], "INFO")
        return f"[{level}] {entry['text']}\n"

    # Write a line to the log file and terminal
    def log(self, text, color="black", print=True):
        # Debug lines only reach the terminal when not quiet
        if print and not (self.quiet() and color in ("gray", "black", "blue")):
            self.print_colored(text, color)
        entry = {"text": text, "color": color}
        self.logs.append(entry)
        if self._log_file:
            with open(self._log_file, "a") as f:
                f.write(self.format_entry(entry))
        return text


# Create a global logger
logger = Logger()
