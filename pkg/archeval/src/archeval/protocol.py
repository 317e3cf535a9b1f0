"""JSON Schemas for the evaluation wire protocol (frozen, version 1)."""

GRAPH_SCHEMA = {
    "type": "object",
    "required": ["format", "version", "input_shape", "n_classes", "nodes", "edges"],
    "properties": {
        "format": {"const": "arch-graph"},
        "version": {"const": 1},
        "input_shape": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
            "minItems": 3,
            "maxItems": 3,
        },
        "n_classes": {"type": "integer", "minimum": 1},
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "block_type", "channels", "kernel", "stage"],
                "properties": {
                    "id": {"type": "string"},
                    "block_type": {"type": "string"},
                    "channels": {"type": ["integer", "null"]},
                    "kernel": {"type": ["integer", "null"]},
                    "stage": {"type": ["integer", "null"]},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "string"},
                "minItems": 2,
                "maxItems": 2,
            },
        },
    },
}

REQUEST_SCHEMA = {
    "type": "object",
    "required": ["v", "id", "arch", "epochs", "dataset"],
    "properties": {
        "v": {"const": 1},
        "id": {"type": "string"},
        "arch": GRAPH_SCHEMA,
        "epochs": {"type": "integer", "minimum": 0},
        "dataset": {"type": "string"},
        "variant": {"type": "string"},
    },
}

RESPONSE_SCHEMA = {
    "type": "object",
    "required": ["v", "id", "status"],
    "properties": {
        "v": {"const": 1},
        "id": {"type": "string"},
        "status": {"enum": ["ok", "failed"]},
        "error": {"type": "number", "minimum": 0.0, "maximum": 1.0},
        "diagnostics": {"type": "string"},
    },
    "allOf": [
        {
            "if": {"properties": {"status": {"const": "ok"}}},
            "then": {"required": ["error"]},
            "else": {"not": {"required": ["error"]}},
        }
    ],
}
