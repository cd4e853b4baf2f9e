"""Build the API reference pages, one per public module"""

from pathlib import Path

import mkdocs_gen_files

PACKAGE = Path("cclab")
REFERENCE = Path("reference")

# the CLI has its own page, and these have nothing public to document
SKIPPED = {"cli.py", "__main__.py"}

nav = mkdocs_gen_files.Nav()

for module in sorted(PACKAGE.rglob("*.py")):
    if PACKAGE / "test" in module.parents or module.name in SKIPPED:
        continue
    if module.name.startswith("_") and module.name != "__init__.py":
        continue

    parts: tuple[str, ...] = module.with_suffix("").parts
    page = REFERENCE / module.with_suffix(".md")
    if module.name == "__init__.py":
        parts = parts[:-1]
        page = page.with_name("index.md")

    with mkdocs_gen_files.open(page, "w") as doc_file:
        doc_file.write(f"::: {'.'.join(parts)}\n")

    mkdocs_gen_files.set_edit_path(page, module)
    nav[parts] = page.relative_to(REFERENCE).as_posix()

with mkdocs_gen_files.open(REFERENCE / "SUMMARY.md", "w") as nav_file:
    nav_file.writelines(nav.build_literate_nav())
