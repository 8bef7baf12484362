//! Machine-readable description of the HTTP API (OpenAPI 3.0).

use serde_json::{json, Value};

fn error(description: &str) -> Value {
    json!({
        "description": description,
        "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Error"}}}
    })
}

fn items() -> Value {
    json!({
        "description": "ranked recommendations",
        "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Items"}}}
    })
}

fn id_param() -> Value {
    json!({"name": "id", "in": "path", "required": true, "schema": {"type": "string"}})
}

pub fn openapi_describe() -> Value {
    json!({
        "openapi": "3.0.3",
        "info": {
            "title": "contextrec",
            "version": env!("CARGO_PKG_VERSION"),
            "description": "Contextual document similarity and analogical literature recommendation."
        },
        "paths": {
            "/health": {
                "get": {
                    "summary": "Liveness probe",
                    "responses": {"200": {
                        "description": "service is up",
                        "content": {"application/json": {"schema": {
                            "type": "object",
                            "properties": {"status": {"type": "string", "enum": ["ok"]}}
                        }}}
                    }}
                }
            },
            "/contexts": {
                "get": {
                    "summary": "Configured similarity contexts",
                    "responses": {"200": {
                        "description": "context labels in configuration order",
                        "content": {"application/json": {"schema": {
                            "type": "object",
                            "properties": {"contexts": {"type": "array", "items": {"type": "string"}}}
                        }}}
                    }}
                }
            },
            "/documents/{id}": {
                "get": {
                    "summary": "One corpus document",
                    "parameters": [id_param()],
                    "responses": {
                        "200": {
                            "description": "the document",
                            "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Document"}}}
                        },
                        "404": error("unknown_document")
                    }
                }
            },
            "/documents/{id}/recommendations": {
                "get": {
                    "summary": "Diverse or focused recommendations for a seed document",
                    "parameters": [
                        id_param(),
                        {"name": "mode", "in": "query", "required": false,
                         "schema": {"type": "string", "enum": ["diverse", "focused"], "default": "diverse"}},
                        {"name": "context", "in": "query", "required": false,
                         "description": "required when mode=focused", "schema": {"type": "string"}},
                        {"name": "k", "in": "query", "required": false,
                         "schema": {"type": "integer", "minimum": 1, "default": 10}}
                    ],
                    "responses": {
                        "200": items(),
                        "400": error("bad_query"),
                        "404": error("unknown_document"),
                        "422": error("unknown_context"),
                        "500": error("internal")
                    }
                }
            },
            "/query": {
                "post": {
                    "summary": "Analogical query: similar in required contexts, dissimilar in excluded ones",
                    "requestBody": {
                        "required": true,
                        "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Query"}}}
                    },
                    "responses": {
                        "200": items(),
                        "400": error("bad_query"),
                        "404": error("unknown_document"),
                        "422": error("unknown_context"),
                        "500": error("internal")
                    }
                }
            },
            "/openapi.json": {
                "get": {
                    "summary": "This document",
                    "responses": {"200": {"description": "OpenAPI description"}}
                }
            }
        },
        "components": {"schemas": {
            "Error": {
                "type": "object",
                "required": ["code", "message"],
                "properties": {
                    "code": {"type": "string",
                             "enum": ["unknown_document", "bad_query", "unknown_context", "internal", "not_found"]},
                    "message": {"type": "string"}
                }
            },
            "Query": {
                "type": "object",
                "required": ["seed"],
                "properties": {
                    "seed": {"type": "string"},
                    "require": {"type": "array", "items": {"type": "string"}},
                    "exclude": {"type": "array", "items": {"type": "string"}},
                    "k": {"type": "integer", "minimum": 1, "default": 10},
                    "tau_sim": {"type": "number"},
                    "tau_dis": {"type": "number"}
                }
            },
            "MatchedContext": {
                "type": "object",
                "properties": {"context": {"type": "string"}, "sim": {"type": "number"}}
            },
            "RecommendationItem": {
                "type": "object",
                "properties": {
                    "id": {"type": "string"},
                    "title": {"type": "string"},
                    "score": {"type": "number"},
                    "matched": {"type": "array", "items": {"$ref": "#/components/schemas/MatchedContext"}},
                    "provenance": {"type": "array", "items": {"type": "string",
                        "enum": ["annotation", "segment", "citation-context", "classifier"]}}
                }
            },
            "Items": {
                "type": "object",
                "properties": {"items": {"type": "array", "items": {"$ref": "#/components/schemas/RecommendationItem"}}}
            },
            "Document": {
                "type": "object",
                "properties": {
                    "id": {"type": "string"},
                    "title": {"type": "string"},
                    "sections": {"type": "array", "items": {"type": "object"}},
                    "citations": {"type": "array", "items": {"type": "object"}},
                    "annotations": {"type": "array", "items": {"type": "object"}}
                }
            }
        }}
    })
}
