"""Validates every JSON file in a directory against the run-config schema."""
import json
import pathlib
import sys

import jsonschema


def main(schema_path, config_dir):
    schema = json.loads(pathlib.Path(schema_path).read_text())
    validator = jsonschema.validators.validator_for(schema)(schema)
    failures = 0
    files = sorted(pathlib.Path(config_dir).glob("*.json"))
    for f in files:
        errors = list(validator.iter_errors(json.loads(f.read_text())))
        for e in errors:
            print(f"{f.name}: {'/'.join(map(str, e.absolute_path))}: {e.message}")
        failures += bool(errors)
    print(f"{len(files) - failures}/{len(files)} configs valid")
    return 1 if failures or not files else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1], sys.argv[2]))
