use edgefaas_overlay::Site;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Error {
    #[error("query id {0:?} already registered")]
    DuplicateQueryId(String),
    #[error("query {0:?} does not match the document")]
    QueryDoesNotMatch(String),
    #[error("invalid query {id:?}: {reason}")]
    InvalidQuery { id: String, reason: &'static str },
    #[error("document {0:?} has no text fields")]
    EmptyDocument(String),
    #[error("no link profile between {0} and {1}")]
    MissingLink(Site, Site),
    #[error("invalid bench config: {0}")]
    InvalidConfig(&'static str),
}
