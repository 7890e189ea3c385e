"""
Console reporting for the CLI: banners and coloured PASS/FAIL lines.
"""
import sys

from colorama import Fore, Style
from colorama import init as colorama_init

colorama_init()


class ConsoleReporter:
    """Human-readable run progress on stdout; machine output goes to files."""

    WIDTH = 72

    def __init__(self, stream=None, quiet: bool = False):
        self.stream = stream or sys.stdout
        self.quiet = quiet

    def _write(self, text: str) -> None:
        if not self.quiet:
            print(text, file=self.stream)

    def banner(self, title: str, **fields) -> None:
        self._write("=" * self.WIDTH)
        self._write(f"{Style.BRIGHT}{title}{Style.RESET_ALL}")
        for key, value in fields.items():
            self._write(f"   {key}: {value}")
        self._write("=" * self.WIDTH)

    def status(self, label: str, ok: bool, detail: str = "") -> None:
        tag = f"{Fore.GREEN}PASS{Style.RESET_ALL}" if ok else f"{Fore.RED}FAIL{Style.RESET_ALL}"
        suffix = f"  {detail}" if detail else ""
        self._write(f"[{tag}] {label}{suffix}")

    def info(self, message: str) -> None:
        self._write(f"{Fore.CYAN}>{Style.RESET_ALL} {message}")

    def warn(self, message: str) -> None:
        self._write(f"{Fore.YELLOW}!{Style.RESET_ALL} {message}")

    def error(self, message: str) -> None:
        print(f"{Fore.RED}{message}{Style.RESET_ALL}", file=sys.stderr)

    def files(self, paths) -> None:
        for p in paths:
            self._write(f"   wrote {p}")
